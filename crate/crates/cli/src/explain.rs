//! Step-by-step narration of a scenario.
//!
//! Accounts are named by the role they hold in the scenario's plan or
//! recovery config. Friends registered by commitment are only ever shown as
//! a commitment prefix, so the narration leaks no more than the trace does.

use std::collections::{BTreeMap, BTreeSet};

use inherit_core::sim::Scenario;
use inherit_core::{
    commit_friend, AccountId, Call, DeadmanAction, DispatchError, DispatchOutput, FriendRef,
    Origin, Role,
};

/// Hex digits of a commitment shown in narration.
const SHORT_HEX: usize = 12;

fn role_name(role: Role) -> &'static str {
    match role {
        Role::Testator => "testator",
        Role::Executor => "executor",
        Role::Guardian => "guardian",
        Role::Beneficiary => "beneficiary",
    }
}

fn short(hex: &str) -> String {
    format!("{}..", &hex[..SHORT_HEX.min(hex.len())])
}

struct Cast {
    roles: BTreeMap<AccountId, Role>,
    hidden: BTreeSet<AccountId>,
    committed_lost: BTreeSet<AccountId>,
}

impl Cast {
    fn gather(scenario: &Scenario) -> Self {
        let mut cast = Cast {
            roles: BTreeMap::new(),
            hidden: BTreeSet::new(),
            committed_lost: BTreeSet::new(),
        };
        for step in &scenario.steps {
            let actor = match &step.actor {
                Origin::Signed(a) => Some(a),
                Origin::Root => None,
            };
            cast.note(actor, &step.call);
        }
        cast
    }

    fn assign(&mut self, account: &AccountId, role: Role) {
        let slot = self.roles.entry(account.clone()).or_insert(role);
        *slot = (*slot).min(role);
    }

    fn note(&mut self, actor: Option<&AccountId>, call: &Call) {
        match call {
            Call::BuildPlan(spec) => {
                if let Some(t) = actor {
                    self.assign(t, Role::Testator);
                }
                self.assign(&spec.executor, Role::Executor);
                for g in &spec.guardians {
                    self.friend(actor, g);
                }
                for b in &spec.beneficiaries {
                    self.assign(&b.account, Role::Beneficiary);
                }
            }
            Call::CreateRecovery { friends, .. } => {
                if let Some(t) = actor {
                    self.assign(t, Role::Testator);
                }
                for f in friends {
                    self.friend(actor, f);
                }
            }
            Call::MintSbt { owner, role } => self.assign(owner, *role),
            Call::CommitFriend { account, .. } => {
                self.hidden.insert(account.clone());
            }
            Call::VouchRecoveryCommitted { .. } => {
                if let Some(a) = actor {
                    self.hidden.insert(a.clone());
                }
            }
            Call::VouchRecovery { lost, .. } if self.committed_lost.contains(lost) => {
                if let Some(a) = actor {
                    self.hidden.insert(a.clone());
                }
            }
            Call::AsRecovered { lost, call } => self.note(Some(lost), call),
            _ => {}
        }
    }

    fn friend(&mut self, lost: Option<&AccountId>, f: &FriendRef) {
        match f {
            FriendRef::Plain(a) => self.assign(a, Role::Guardian),
            FriendRef::Committed { .. } => {
                if let Some(l) = lost {
                    self.committed_lost.insert(l.clone());
                }
            }
        }
    }

    fn name(&self, account: &AccountId) -> String {
        if self.hidden.contains(account) && !self.roles.contains_key(account) {
            return "an undisclosed friend".into();
        }
        match self.roles.get(account) {
            Some(role) => format!("{} {account}", role_name(*role)),
            None => format!("account {account}"),
        }
    }

    fn origin(&self, origin: &Origin) -> String {
        match origin {
            Origin::Root => "governance (Root)".into(),
            Origin::Signed(a) => self.name(a),
        }
    }
}

fn friend_list(cast: &Cast, friends: &[FriendRef]) -> String {
    friends
        .iter()
        .map(|f| match f {
            FriendRef::Plain(a) => cast.name(a),
            FriendRef::Committed { commitment } => {
                format!("commitment {}", short(&commitment.to_hex()))
            }
        })
        .collect::<Vec<_>>()
        .join(", ")
}

fn describe(cast: &Cast, call: &Call) -> String {
    match call {
        Call::CreateAccount { id, endowment } => {
            format!("opens {} with {endowment}", cast.name(id))
        }
        Call::Transfer { to, amount } => format!("transfers {amount} to {}", cast.name(to)),
        Call::AdvanceBlocks { n } => format!("lets {n} blocks pass"),
        Call::TotalIssuance {} => "reads the total issuance".into(),
        Call::CreateRecovery {
            friends,
            threshold,
            delay_period,
        } => format!(
            "registers a recovery config: friends [{}], {threshold} vouches needed, delay {delay_period} blocks",
            friend_list(cast, friends)
        ),
        Call::InitiateRecovery { lost } => {
            format!("opens a recovery attempt against {}", cast.name(lost))
        }
        Call::VouchRecovery { lost, rescuer } => format!(
            "vouches for {} to recover {}",
            cast.name(rescuer),
            cast.name(lost)
        ),
        Call::ClaimRecovery { lost } => format!("claims proxy control of {}", cast.name(lost)),
        Call::CloseRecovery { rescuer } => {
            format!("closes the recovery attempt by {}", cast.name(rescuer))
        }
        Call::RemoveRecovery {} => "removes its recovery config".into(),
        Call::AsRecovered { lost, call } => format!(
            "acting for {}: {}",
            cast.name(lost),
            describe(cast, call)
        ),
        Call::RootSetRecovered { lost, rescuer } => format!(
            "binds {} as proxy of {}",
            cast.name(rescuer),
            cast.name(lost)
        ),
        Call::CommitFriend { account, salt } => match commit_friend(account, &salt.0) {
            Ok(c) => format!("computes friend commitment {}", short(&c.to_hex())),
            Err(_) => "computes a friend commitment from a malformed salt".into(),
        },
        Call::VouchRecoveryCommitted { lost, rescuer, .. } => format!(
            "vouches by commitment for {} to recover {}",
            cast.name(rescuer),
            cast.name(lost)
        ),
        Call::MintSbt { owner, role } => format!(
            "issues a {} credential to {}",
            role_name(*role),
            cast.name(owner)
        ),
        Call::SbtTransfer { token_id, to } => {
            format!("tries to hand token {token_id} to {}", cast.name(to))
        }
        Call::SetAttribute {
            token_id,
            key,
            value,
        } => format!("sets {key}={value} on token {token_id}"),
        Call::VerifyExistence { testator } => {
            format!("checks that every party of {}'s plan holds a credential", cast.name(testator))
        }
        Call::ArmSwitch {
            liveness_period,
            grace_period,
            action,
        } => {
            let grace = grace_period.map_or("default grace".into(), |g| format!("grace {g}"));
            let then = match action {
                DeadmanAction::None => "an alert only".into(),
                DeadmanAction::AutoInitiate(r) => {
                    format!("a recovery opened for {}", cast.name(r))
                }
            };
            format!(
                "arms a dead-man switch: check in every {liveness_period} blocks, {grace}, then {then}"
            )
        }
        Call::CheckIn {} => "checks in".into(),
        Call::Disarm {} => "disarms its dead-man switch".into(),
        Call::BuildPlan(spec) => {
            let shares = spec
                .beneficiaries
                .iter()
                .map(|b| format!("{} {}", cast.name(&b.account), b.share))
                .collect::<Vec<_>>()
                .join(", ");
            let exec = if spec.executor_is_friend {
                " (also a friend)"
            } else {
                ""
            };
            format!(
                "drafts a plan: {}{exec}, guardians [{}], {} vouches, delay {} blocks, shares {shares}",
                cast.name(&spec.executor),
                friend_list(cast, &spec.guardians),
                spec.threshold,
                spec.delay_period
            )
        }
        Call::EnactPlan {} => "enacts the plan as its recovery config".into(),
        Call::SweepAssets { testator } => {
            format!("sweeps the estate of {} to the beneficiaries", cast.name(testator))
        }
    }
}

fn result_note(result: &Result<DispatchOutput, DispatchError>) -> String {
    match result {
        Ok(DispatchOutput::Sweep(r)) => format!(
            "ok, {} moved, dust recipient {}",
            r.total_moved, r.dust_recipient
        ),
        Ok(DispatchOutput::Token(t)) => format!("ok, token {}", t.token_id),
        Ok(DispatchOutput::Issuance(v)) => format!("ok, {v}"),
        Ok(_) => "ok".into(),
        Err(e) => format!("rejected: {}", e.id()),
    }
}

/// One numbered line per step. `outcomes` holds each step's dispatch result.
pub fn narrate(
    scenario: &Scenario,
    outcomes: &[Result<DispatchOutput, DispatchError>],
) -> Vec<String> {
    let cast = Cast::gather(scenario);
    let mut lines = vec![format!("{}:", scenario.name)];
    for (i, (step, result)) in scenario.steps.iter().zip(outcomes).enumerate() {
        let sentence = match (&step.actor, &step.call) {
            (Origin::Signed(a), Call::VouchRecoveryCommitted { salt, lost, rescuer }) => {
                let who = match commit_friend(a, &salt.0) {
                    Ok(c) => format!("the holder of commitment {}", short(&c.to_hex())),
                    Err(_) => "a caller with a malformed salt".into(),
                };
                format!(
                    "{who} vouches for {} to recover {}",
                    cast.name(rescuer),
                    cast.name(lost)
                )
            }
            (actor, call) => format!("{} {}", cast.origin(actor), describe(&cast, call)),
        };
        lines.push(format!(
            "{:>3}. [block {}] {sentence}: {}",
            i + 1,
            step.at_block,
            result_note(result)
        ));
    }
    lines
}
