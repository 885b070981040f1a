//! Invariant suites run by `inherit check`.
//!
//! Each suite builds its own runtimes, so suites are independent of each
//! other and of any scenario file. Randomized suites draw from ChaCha8
//! seeded by `INHERIT_SEED` (default 0), so a failure can be replayed.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::commit::{commit_friend, verify_opening, Commitment32};
use crate::deadman::DeadmanAction;
use crate::error::DispatchError;
use crate::inheritance::{Beneficiary, PlanSpec, Share};
use crate::ledger::{AccountId, Balance, BlockNumber};
use crate::recovery::FriendRef;
use crate::runtime::{Call, Origin, Runtime};
use crate::sbt::{Role, SbtError};

pub const SUITES: &[&str] = &[
    "conservation",
    "threshold",
    "sbt_nontransfer",
    "deadman",
    "commitment",
];

pub const SEED_VAR: &str = "INHERIT_SEED";

/// Seed from `INHERIT_SEED`, or 0 when unset.
pub fn seed_from_env() -> Result<u64, String> {
    match std::env::var(SEED_VAR) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| format!("{SEED_VAR} must be an unsigned integer, got {v:?}")),
        Err(_) => Ok(0),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuiteReport {
    pub name: &'static str,
    pub cases: u64,
    /// Empty iff the suite passed. Capped at a few entries.
    pub failures: Vec<String>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

const MAX_REPORTED: usize = 5;

struct Tally {
    name: &'static str,
    cases: u64,
    failures: Vec<String>,
    failed: u64,
}

impl Tally {
    fn new(name: &'static str) -> Self {
        Tally {
            name,
            cases: 0,
            failures: Vec::new(),
            failed: 0,
        }
    }

    fn check(&mut self, ok: bool, describe: impl FnOnce() -> String) {
        self.cases += 1;
        if !ok {
            self.failed += 1;
            if self.failures.len() < MAX_REPORTED {
                self.failures.push(describe());
            }
        }
    }

    fn finish(mut self) -> SuiteReport {
        let hidden = self.failed - self.failures.len() as u64;
        if hidden > 0 {
            self.failures.push(format!("... and {hidden} more"));
        }
        SuiteReport {
            name: self.name,
            cases: self.cases,
            failures: self.failures,
        }
    }
}

type Factory<'a> = &'a dyn Fn() -> Runtime;

fn fresh() -> Runtime {
    Runtime::default()
}

/// Runs one suite by name. `None` for an unknown name.
pub fn run_suite(name: &str, seed: u64) -> Option<SuiteReport> {
    run_suite_with(name, seed, &fresh)
}

pub(crate) fn run_suite_with(name: &str, seed: u64, make: Factory) -> Option<SuiteReport> {
    Some(match name {
        "conservation" => conservation(seed, make),
        "threshold" => threshold(make),
        "sbt_nontransfer" => sbt_nontransfer(seed, make),
        "deadman" => deadman(seed, make),
        "commitment" => commitment(seed, make),
        _ => return None,
    })
}

pub fn run_all(seed: u64) -> Vec<SuiteReport> {
    SUITES
        .iter()
        .map(|s| run_suite(s, seed).expect("listed suites exist"))
        .collect()
}

fn id(label: &str) -> AccountId {
    AccountId::new(label).expect("suite labels are valid")
}

fn signed(label: &AccountId) -> Origin {
    Origin::Signed(label.clone())
}

// ---- conservation ----------------------------------------------------------

pub const CONSERVATION_DISPATCHES: u64 = 1000;
const CONSERVATION_ATTEMPT_CAP: u64 = 50_000;

fn random_call(rng: &mut ChaCha8Rng, pool: &[AccountId]) -> (Origin, Call) {
    let pick = |rng: &mut ChaCha8Rng| pool.choose(rng).expect("pool is nonempty").clone();
    let subset = |rng: &mut ChaCha8Rng, max: usize| {
        let n = rng.gen_range(1..=max);
        let mut s: Vec<AccountId> = pool.choose_multiple(rng, n).cloned().collect();
        s.sort();
        s
    };
    let actor = pick(rng);
    let call = match rng.gen_range(0..17) {
        0 | 1 => Call::Transfer {
            to: pick(rng),
            amount: rng.gen_range(0..300),
        },
        2 => {
            let friends = subset(rng, 4);
            Call::CreateRecovery {
                threshold: rng.gen_range(1..=friends.len() as u32),
                friends: friends.into_iter().map(FriendRef::Plain).collect(),
                delay_period: rng.gen_range(0..20),
            }
        }
        3 => Call::InitiateRecovery { lost: pick(rng) },
        4 => Call::VouchRecovery {
            lost: pick(rng),
            rescuer: pick(rng),
        },
        5 => Call::ClaimRecovery { lost: pick(rng) },
        6 => Call::CloseRecovery { rescuer: pick(rng) },
        7 => Call::RemoveRecovery {},
        8 => Call::AsRecovered {
            lost: pick(rng),
            call: Box::new(Call::Transfer {
                to: pick(rng),
                amount: rng.gen_range(0..300),
            }),
        },
        9 => Call::AdvanceBlocks {
            n: rng.gen_range(0..6),
        },
        10 => Call::MintSbt {
            owner: pick(rng),
            role: *[Role::Executor, Role::Guardian, Role::Beneficiary]
                .choose(rng)
                .expect("nonempty"),
        },
        11 => Call::ArmSwitch {
            liveness_period: rng.gen_range(1..30),
            grace_period: Some(rng.gen_range(0..10)),
            action: if rng.gen_bool(0.5) {
                DeadmanAction::AutoInitiate(pick(rng))
            } else {
                DeadmanAction::None
            },
        },
        12 => Call::CheckIn {},
        13 => {
            let guardians = subset(rng, 4);
            let heirs = subset(rng, 3);
            let k = heirs.len() as u64;
            Call::BuildPlan(PlanSpec {
                executor: pick(rng),
                threshold: rng.gen_range(1..=guardians.len() as u32),
                guardians: guardians.into_iter().map(FriendRef::Plain).collect(),
                delay_period: rng.gen_range(0..20),
                beneficiaries: heirs
                    .into_iter()
                    .map(|account| Beneficiary {
                        account,
                        share: Share::new(1, k).expect("k > 0"),
                    })
                    .collect(),
                executor_is_friend: rng.gen_bool(0.5),
                notification_cadence: rng.gen_bool(0.5).then(|| rng.gen_range(1..8)),
            })
        }
        14 => Call::EnactPlan {},
        15 => Call::SweepAssets { testator: pick(rng) },
        _ => Call::Disarm {},
    };
    (signed(&actor), call)
}

fn balance_sum(rt: &Runtime) -> Balance {
    rt.ledger().accounts().map(|a| a.free + a.reserved).sum()
}

/// Random dispatches never change total issuance, and a failed dispatch
/// changes nothing at all.
fn conservation(seed: u64, make: Factory) -> SuiteReport {
    let mut t = Tally::new("conservation");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pool: Vec<AccountId> = (0..8).map(|i| id(&format!("A{i}"))).collect();
    let mut rt = make();
    for who in &pool {
        rt.create_account(who.clone(), rng.gen_range(0..1000))
            .expect("fresh pool");
    }
    let issuance = rt.total_issuance();

    let (mut ok, mut attempts) = (0u64, 0u64);
    while ok < CONSERVATION_DISPATCHES && attempts < CONSERVATION_ATTEMPT_CAP {
        attempts += 1;
        let (origin, call) = random_call(&mut rng, &pool);
        let before = (rt.state_dump(), rt.trace().len());
        let result = rt.dispatch(origin, call.clone());
        ok += u64::from(result.is_ok());

        let (now, summed) = (rt.total_issuance(), balance_sum(&rt));
        t.check(now == issuance && summed == issuance, || {
            format!(
                "dispatch {attempts} ({}) moved issuance {issuance} -> {now} (accounts sum to {summed})",
                call.name()
            )
        });
        if let Err(e) = result {
            let unchanged = rt.state_dump() == before.0 && rt.trace().len() == before.1;
            t.check(unchanged, || {
                format!("failed dispatch {attempts} ({}, {}) left changes behind", call.name(), e.id())
            });
        }
    }
    t.check(ok >= CONSERVATION_DISPATCHES, || {
        format!("only {ok} successful dispatches in {attempts} attempts")
    });
    t.finish()
}

// ---- threshold -------------------------------------------------------------

pub const THRESHOLD_FRIENDS: usize = 5;
pub const THRESHOLD_M: u32 = 3;
pub const THRESHOLD_DELAY: BlockNumber = 100;
pub const THRESHOLD_INITIATED: BlockNumber = 60;

/// Claims a recovery after the friends in `mask` vouched. Public so the
/// acceptance suite can drive the same setup.
pub fn claim_after_vouches(make: Factory, mask: u32, claim_at: BlockNumber) -> Result<(), DispatchError> {
    let mut rt = make();
    let (t, e) = (id("T"), id("E"));
    let friends: Vec<AccountId> = (1..=THRESHOLD_FRIENDS).map(|i| id(&format!("F{i}"))).collect();
    rt.create_account(t.clone(), 1000)?;
    rt.create_account(e.clone(), 100)?;
    rt.create_recovery(
        &t,
        friends.iter().cloned().map(FriendRef::Plain).collect(),
        THRESHOLD_M,
        THRESHOLD_DELAY,
    )?;
    rt.advance_blocks(THRESHOLD_INITIATED);
    rt.initiate_recovery(&e, &t)?;
    for (i, f) in friends.iter().enumerate() {
        if mask & (1 << i) != 0 {
            rt.vouch_recovery(f, &t, &e)?;
        }
    }
    rt.advance_blocks(claim_at - rt.height());
    rt.claim_recovery(&e, &t).map(|_| ())
}

/// Every vouch subset of a 5-friend, threshold-3 config, claimed one block
/// before and exactly at the end of the delay.
fn threshold(make: Factory) -> SuiteReport {
    let mut t = Tally::new("threshold");
    let ready = THRESHOLD_INITIATED + THRESHOLD_DELAY;
    let mut successes: BTreeMap<BlockNumber, u32> = BTreeMap::new();
    for claim_at in [ready - 1, ready] {
        for mask in 0u32..(1 << THRESHOLD_FRIENDS) {
            let enough = mask.count_ones() >= THRESHOLD_M;
            let expected = match (claim_at >= ready, enough) {
                (false, _) => Err("DelayPeriod"),
                (true, false) => Err("Threshold"),
                (true, true) => Ok(()),
            };
            let actual = claim_after_vouches(make, mask, claim_at).map_err(|e| e.id());
            *successes.entry(claim_at).or_default() += u32::from(actual.is_ok());
            t.check(actual == expected, || {
                format!("vouch mask {mask:05b} claim at {claim_at}: expected {expected:?}, got {actual:?}")
            });
        }
    }
    let (early, on_time) = (successes[&(ready - 1)], successes[&ready]);
    t.check(early == 0 && on_time == 16, || {
        format!("{early} claims succeeded at {}, {on_time} at {ready}; expected 0 and 16", ready - 1)
    });
    t.finish()
}

// ---- sbt_nontransfer -------------------------------------------------------

pub const SBT_ATTEMPTS: u64 = 500;

/// Fuzzed transfer attempts all fail and no token ever changes hands.
fn sbt_nontransfer(seed: u64, make: Factory) -> SuiteReport {
    let mut t = Tally::new("sbt_nontransfer");
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5b7);
    let pool: Vec<AccountId> = (0..6).map(|i| id(&format!("H{i}"))).collect();
    let mut rt = make();
    for who in &pool {
        rt.create_account(who.clone(), 0).expect("fresh pool");
    }
    let roles = [Role::Testator, Role::Executor, Role::Guardian, Role::Beneficiary];
    for _ in 0..24 {
        let issuer = pool.choose(&mut rng).expect("nonempty");
        let owner = pool.choose(&mut rng).expect("nonempty");
        let role = *roles.choose(&mut rng).expect("nonempty");
        rt.mint_sbt(issuer, owner, role).expect("pool accounts exist");
    }
    let owners = |rt: &Runtime| -> Vec<(u64, AccountId)> {
        rt.sbts().tokens().map(|k| (k.token_id, k.owner.clone())).collect()
    };
    let (initial, events) = (owners(&rt), rt.trace().len());
    let max_id = initial.len() as u64;

    for attempt in 0..SBT_ATTEMPTS {
        // mostly real tokens, sometimes ids that were never minted
        let token_id = rng.gen_range(0..=max_id + 3);
        let from = pool.choose(&mut rng).expect("nonempty").clone();
        let to = pool.choose(&mut rng).expect("nonempty").clone();
        let result = rt.dispatch(signed(&from), Call::SbtTransfer { token_id, to });
        t.check(result == Err(SbtError::NonTransferable.into()), || {
            format!("attempt {attempt} on token {token_id} returned {result:?}")
        });
    }
    t.check(owners(&rt) == initial, || "a token changed owner".into());
    t.check(rt.trace().len() == events, || "a transfer attempt emitted an event".into());
    t.finish()
}

// ---- deadman ---------------------------------------------------------------

pub const DEADMAN_PERIOD: BlockNumber = 100;
pub const DEADMAN_GRACE: BlockNumber = 20;
pub const DEADMAN_WINDOW: BlockNumber = 300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum DeadmanMark {
    Alert,
    Fired,
}

/// Block-by-block model of one switch armed at block 0 with the given
/// check-in blocks. Returns `(block, mark, last_checkin)` for every event
/// up to `horizon`.
pub fn deadman_model(
    checkins: &[BlockNumber],
    horizon: BlockNumber,
    period: BlockNumber,
    grace: BlockNumber,
) -> Vec<(BlockNumber, DeadmanMark, BlockNumber)> {
    let mut out = Vec::new();
    let (mut last, mut alerted, mut fired) = (0, false, false);
    for block in 1..=horizon {
        if fired {
            break;
        }
        // the hook runs as the block opens, before that block's check-in
        if !alerted && block - last > period {
            alerted = true;
            out.push((block, DeadmanMark::Alert, last));
        }
        if alerted && block - last > period + grace {
            fired = true;
            out.push((block, DeadmanMark::Fired, last));
        }
        if !fired && checkins.contains(&block) {
            last = block;
            alerted = false;
        }
    }
    out
}

/// Drives the real switch through the same schedule.
pub fn deadman_engine(
    make: Factory,
    checkins: &[BlockNumber],
    horizon: BlockNumber,
    period: BlockNumber,
    grace: BlockNumber,
) -> Vec<(BlockNumber, DeadmanMark, BlockNumber)> {
    let mut rt = make();
    let owner = id("T");
    rt.create_account(owner.clone(), 0).expect("fresh runtime");
    rt.arm_switch(&owner, period, grace, DeadmanAction::None)
        .expect("valid switch");
    for &c in checkins {
        rt.advance_blocks(c - rt.height());
        // a check-in after firing fails; the model ignores it too
        let _ = rt.dispatch(signed(&owner), Call::CheckIn {});
    }
    rt.advance_blocks(horizon - rt.height());
    rt.trace()
        .iter()
        .filter_map(|e| match &e.event {
            crate::ledger::Event::DeadmanAlert { last_checkin, .. } => {
                Some((e.block, DeadmanMark::Alert, *last_checkin))
            }
            crate::ledger::Event::DeadmanFired { .. } => Some((e.block, DeadmanMark::Fired, 0)),
            _ => None,
        })
        .collect()
}

fn strip_fired_last(
    events: Vec<(BlockNumber, DeadmanMark, BlockNumber)>,
) -> Vec<(BlockNumber, DeadmanMark, BlockNumber)> {
    events
        .into_iter()
        .map(|(b, m, l)| (b, m, if m == DeadmanMark::Fired { 0 } else { l }))
        .collect()
}

/// Every single check-in placement in the window, plus schedules whose gaps
/// never exceed the period.
fn deadman(seed: u64, make: Factory) -> SuiteReport {
    let mut t = Tally::new("deadman");
    let (p, g) = (DEADMAN_PERIOD, DEADMAN_GRACE);
    for c in 1..=DEADMAN_WINDOW {
        let horizon = c + p + g + 50;
        let engine = deadman_engine(make, &[c], horizon, p, g);
        let model = strip_fired_last(deadman_model(&[c], horizon, p, g));
        t.check(engine == model, || {
            format!("check-in at {c}: engine {engine:?}, model {model:?}")
        });
        // each alert lands at last+101 and the firing at last+121
        let model_full = deadman_model(&[c], horizon, p, g);
        let timed = model_full.iter().all(|&(b, m, last)| match m {
            DeadmanMark::Alert => b == last + p + 1,
            DeadmanMark::Fired => b == last + p + g + 1,
        });
        let fired = model_full.iter().filter(|e| e.1 == DeadmanMark::Fired).count();
        t.check(timed && fired == 1, || {
            format!("check-in at {c}: events {model_full:?} mistimed")
        });
        if c <= p {
            let exact = vec![
                (c + p + 1, DeadmanMark::Alert, c),
                (c + p + g + 1, DeadmanMark::Fired, 0),
            ];
            t.check(engine == exact, || {
                format!("check-in at {c}: expected {exact:?}, engine {engine:?}")
            });
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xdead);
    let mut schedules: Vec<Vec<BlockNumber>> = (1..=p)
        .map(|gap| (1..).map(|k| k * gap).take_while(|&b| b <= DEADMAN_WINDOW).collect())
        .collect();
    for _ in 0..200 {
        let mut s = Vec::new();
        let mut at = 0;
        while at < DEADMAN_WINDOW {
            at += rng.gen_range(1..=p);
            s.push(at);
        }
        schedules.push(s);
    }
    for s in schedules {
        let horizon = s.last().copied().unwrap_or(0) + p;
        let engine = deadman_engine(make, &s, horizon, p, g);
        t.check(engine.is_empty(), || {
            format!("schedule with gaps <= {p} ({} check-ins) produced {engine:?}", s.len())
        });
    }
    t.finish()
}

// ---- commitment ------------------------------------------------------------

pub const COMMITMENT_PAIRS: u64 = 256;

/// SHA-256 known answers computed outside this crate.
pub const KNOWN_COMMITMENTS: &[(&str, &str, &str)] = &[
    (
        "F1",
        "01010101010101010101010101010101",
        "b1f4491b629645e27399e879ea684a49dcc307119a3df5d9736486da79ea1340",
    ),
    (
        "alice",
        "000102030405060708090a0b0c0d0e0f",
        "f64d02a56f5d88e7ab03d7f3d8d120c4a4a7a6b3195955710a48a3e5ec86d068",
    ),
    (
        "executor-of-the-estate",
        "ffffffffffffffffffffffffffffffff",
        "6385c5b946c7bebb6ab81df8b8826bd51154990d3500382a32b807fa0174a1e0",
    ),
    (
        "Z",
        "00000000000000000000000000000000",
        "7652ef75be3db17c96bbc21f0b839cc7008cde8cf34aeff3bcdc4bbae31c8baa",
    ),
];

pub fn random_label(rng: &mut ChaCha8Rng) -> String {
    const ALPHABET: &[u8] = b"ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789-_";
    let len = rng.gen_range(1..24);
    (0..len)
        .map(|_| *ALPHABET.choose(rng).expect("nonempty") as char)
        .collect()
}

/// Known answers, opening checks on random pairs, and a committed-mode
/// recovery whose trace must not name a friend.
fn commitment(seed: u64, make: Factory) -> SuiteReport {
    let mut t = Tally::new("commitment");
    for (account, salt, digest) in KNOWN_COMMITMENTS {
        let salt = hex::decode(salt).expect("valid hex");
        let got = commit_friend(&id(account), &salt).map(|c| c.to_hex());
        t.check(got.as_deref() == Ok(*digest), || {
            format!("commit({account}) = {got:?}, expected {digest}")
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xc0);
    for i in 0..COMMITMENT_PAIRS {
        let account = id(&random_label(&mut rng));
        let salt: [u8; 16] = rng.gen();
        let c = commit_friend(&account, &salt).expect("16-byte salt");
        let mut wrong = salt;
        wrong[rng.gen_range(0..16)] ^= 1 << rng.gen_range(0..8);
        let other = id(&format!("{account}x"));
        let reparsed: Result<Commitment32, _> = c.to_hex().parse();
        t.check(
            verify_opening(&c, &account, &salt)
                && !verify_opening(&c, &account, &wrong)
                && !verify_opening(&c, &other, &salt)
                && reparsed == Ok(c),
            || format!("pair {i} ({account}) failed an opening check"),
        );
    }

    // committed recovery: wrong salts are refused and no friend id leaks
    let mut rt = make();
    let (owner, rescuer) = (id("T"), id("E"));
    rt.create_account(owner.clone(), 1000).expect("fresh runtime");
    rt.create_account(rescuer.clone(), 100).expect("fresh runtime");
    let friends: Vec<(AccountId, [u8; 16])> = (0..3)
        .map(|i| (id(&format!("Friend{i}")), rng.gen()))
        .collect();
    let mut refs: Vec<FriendRef> = friends
        .iter()
        .map(|(f, s)| FriendRef::committed(commit_friend(f, s).expect("16 bytes")))
        .collect();
    refs.sort();
    let setup = rt
        .create_recovery(&owner, refs, 2, 0)
        .and_then(|_| rt.initiate_recovery(&rescuer, &owner));
    t.check(setup.is_ok(), || format!("committed setup failed: {setup:?}"));
    for (f, s) in &friends {
        let mut wrong = *s;
        wrong[0] ^= 0x80;
        let refused = rt.vouch_recovery_committed(f, &wrong, &owner, &rescuer);
        t.check(refused == Err(crate::recovery::RecoveryError::NotFriend.into()), || {
            format!("wrong salt for {f} returned {refused:?}")
        });
        let accepted = rt.vouch_recovery_committed(f, s, &owner, &rescuer);
        t.check(accepted.is_ok(), || format!("right salt for {f} returned {accepted:?}"));
    }
    let trace = crate::ledger::trace_to_json_lines(rt.trace());
    for (f, _) in &friends {
        t.check(!trace.contains(f.as_str()), || format!("trace names friend {f}"));
    }
    t.finish()
}
