//! The runtime: one ledger plus the state of every protocol module, and the
//! single dispatch entry point that mutates it.
//!
//! Dispatches are transactional. A call that returns an error leaves no trace
//! and no state change behind, however far it got.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::commit::{commit_friend, Commitment32, HexBytes};
use crate::deadman::{DeadmanAction, DeadmanSwitch};
use crate::error::DispatchError;
use crate::inheritance::{InheritancePlan, NotificationRule, PlanSpec, SweepReport};
use crate::ledger::{
    Account, AccountId, Balance, BlockNumber, Ledger, LedgerSnapshot, TraceEvent, ROOT_LABEL,
};
use crate::recovery::{ActiveRecovery, FriendRef, ProxyBinding, RecoveryConfig, RecoveryState};
use crate::sbt::{ExistenceReport, Role, SbtRegistry, SoulboundToken, TokenId};

/// Engine configuration. Every field can be overridden per scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Constants {
    #[serde(with = "crate::ledger::amount")]
    pub config_deposit_base: Balance,
    #[serde(with = "crate::ledger::amount")]
    pub friend_deposit_factor: Balance,
    #[serde(with = "crate::ledger::amount")]
    pub recovery_deposit: Balance,
    pub max_friends: u32,
    pub default_grace_period: BlockNumber,
}

impl Default for Constants {
    fn default() -> Self {
        Constants {
            config_deposit_base: 10,
            friend_deposit_factor: 1,
            recovery_deposit: 10,
            max_friends: 9,
            default_grace_period: 20,
        }
    }
}

impl Constants {
    /// Deposit reserved on the owner when a recovery config is created.
    pub fn config_deposit(&self, friends: usize) -> Option<Balance> {
        self.friend_deposit_factor
            .checked_mul(friends as Balance)?
            .checked_add(self.config_deposit_base)
    }
}

/// Who is making a call.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Origin {
    Root,
    Signed(AccountId),
}

impl Origin {
    pub fn signed(&self) -> Result<&AccountId, DispatchError> {
        match self {
            Origin::Signed(who) => Ok(who),
            Origin::Root => Err(DispatchError::BadOrigin),
        }
    }

    pub fn ensure_root(&self) -> Result<(), DispatchError> {
        match self {
            Origin::Root => Ok(()),
            Origin::Signed(_) => Err(DispatchError::BadOrigin),
        }
    }
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::Root => f.write_str(ROOT_LABEL),
            Origin::Signed(who) => write!(f, "{who}"),
        }
    }
}

impl fmt::Debug for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl Serialize for Origin {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Origin {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        if s == ROOT_LABEL {
            Ok(Origin::Root)
        } else {
            AccountId::new(s)
                .map(Origin::Signed)
                .map_err(serde::de::Error::custom)
        }
    }
}

/// Every dispatchable operation. Serializes as `{"op": ..., "args": {...}}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", content = "args", rename_all = "snake_case", deny_unknown_fields)]
pub enum Call {
    CreateAccount {
        id: AccountId,
        #[serde(with = "crate::ledger::amount")]
        endowment: Balance,
    },
    Transfer {
        to: AccountId,
        #[serde(with = "crate::ledger::amount")]
        amount: Balance,
    },
    AdvanceBlocks {
        n: u64,
    },
    TotalIssuance {},
    CreateRecovery {
        friends: Vec<FriendRef>,
        threshold: u32,
        delay_period: BlockNumber,
    },
    InitiateRecovery {
        lost: AccountId,
    },
    VouchRecovery {
        lost: AccountId,
        rescuer: AccountId,
    },
    ClaimRecovery {
        lost: AccountId,
    },
    CloseRecovery {
        rescuer: AccountId,
    },
    RemoveRecovery {},
    AsRecovered {
        lost: AccountId,
        call: Box<Call>,
    },
    RootSetRecovered {
        lost: AccountId,
        rescuer: AccountId,
    },
    CommitFriend {
        account: AccountId,
        salt: HexBytes,
    },
    VouchRecoveryCommitted {
        salt: HexBytes,
        lost: AccountId,
        rescuer: AccountId,
    },
    MintSbt {
        owner: AccountId,
        role: Role,
    },
    SbtTransfer {
        token_id: TokenId,
        to: AccountId,
    },
    SetAttribute {
        token_id: TokenId,
        key: String,
        value: String,
    },
    VerifyExistence {
        testator: AccountId,
    },
    ArmSwitch {
        liveness_period: BlockNumber,
        #[serde(default)]
        grace_period: Option<BlockNumber>,
        #[serde(default)]
        action: DeadmanAction,
    },
    CheckIn {},
    Disarm {},
    BuildPlan(PlanSpec),
    EnactPlan {},
    SweepAssets {
        testator: AccountId,
    },
}

impl Call {
    pub fn name(&self) -> &'static str {
        match self {
            Call::CreateAccount { .. } => "create_account",
            Call::Transfer { .. } => "transfer",
            Call::AdvanceBlocks { .. } => "advance_blocks",
            Call::TotalIssuance {} => "total_issuance",
            Call::CreateRecovery { .. } => "create_recovery",
            Call::InitiateRecovery { .. } => "initiate_recovery",
            Call::VouchRecovery { .. } => "vouch_recovery",
            Call::ClaimRecovery { .. } => "claim_recovery",
            Call::CloseRecovery { .. } => "close_recovery",
            Call::RemoveRecovery {} => "remove_recovery",
            Call::AsRecovered { .. } => "as_recovered",
            Call::RootSetRecovered { .. } => "root_set_recovered",
            Call::CommitFriend { .. } => "commit_friend",
            Call::VouchRecoveryCommitted { .. } => "vouch_recovery_committed",
            Call::MintSbt { .. } => "mint_sbt",
            Call::SbtTransfer { .. } => "sbt_transfer",
            Call::SetAttribute { .. } => "set_attribute",
            Call::VerifyExistence { .. } => "verify_existence",
            Call::ArmSwitch { .. } => "arm_switch",
            Call::CheckIn {} => "check_in",
            Call::Disarm {} => "disarm",
            Call::BuildPlan(_) => "build_plan",
            Call::EnactPlan {} => "enact_plan",
            Call::SweepAssets { .. } => "sweep_assets",
        }
    }

    /// The closed set of operation names a scenario may use.
    pub const NAMES: &'static [&'static str] = &[
        "create_account",
        "transfer",
        "advance_blocks",
        "total_issuance",
        "create_recovery",
        "initiate_recovery",
        "vouch_recovery",
        "claim_recovery",
        "close_recovery",
        "remove_recovery",
        "as_recovered",
        "root_set_recovered",
        "commit_friend",
        "vouch_recovery_committed",
        "mint_sbt",
        "sbt_transfer",
        "set_attribute",
        "verify_existence",
        "arm_switch",
        "check_in",
        "disarm",
        "build_plan",
        "enact_plan",
        "sweep_assets",
    ];

    /// This call plus every call nested inside it.
    pub fn walk(&self) -> Vec<&Call> {
        let mut out = vec![self];
        if let Call::AsRecovered { call, .. } = self {
            out.extend(call.walk());
        }
        out
    }
}

/// What a successful dispatch hands back.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DispatchOutput {
    Unit,
    Account(Account),
    Height(BlockNumber),
    Issuance(Balance),
    Config(RecoveryConfig),
    Active(ActiveRecovery),
    Binding(ProxyBinding),
    Commitment(Commitment32),
    Token(SoulboundToken),
    Existence(ExistenceReport),
    Switch(DeadmanSwitch),
    Plan(InheritancePlan),
    Sweep(SweepReport),
}

/// State snapshot taken before a transactional call.
#[derive(Clone)]
pub(crate) struct Checkpoint {
    ledger: LedgerSnapshot,
    rest: Modules,
}

#[derive(Debug, Clone, Default, Serialize)]
pub(crate) struct Modules {
    pub(crate) recovery: RecoveryState,
    pub(crate) sbts: SbtRegistry,
    pub(crate) switches: BTreeMap<AccountId, DeadmanSwitch>,
    pub(crate) plans: BTreeMap<AccountId, InheritancePlan>,
    pub(crate) notifications: BTreeMap<AccountId, NotificationRule>,
}

#[derive(Debug, Clone)]
pub struct Runtime {
    pub(crate) constants: Constants,
    pub(crate) ledger: Ledger,
    pub(crate) m: Modules,
    #[cfg(test)]
    pub(crate) exclusive_delay_mutant: bool,
}

impl Default for Runtime {
    fn default() -> Self {
        Runtime::new(Constants::default())
    }
}

impl Runtime {
    pub fn new(constants: Constants) -> Self {
        Runtime {
            constants,
            ledger: Ledger::new(),
            m: Modules::default(),
            #[cfg(test)]
            exclusive_delay_mutant: false,
        }
    }

    pub fn constants(&self) -> &Constants {
        &self.constants
    }

    pub fn ledger(&self) -> &Ledger {
        &self.ledger
    }

    pub fn height(&self) -> BlockNumber {
        self.ledger.height()
    }

    pub fn trace(&self) -> &[TraceEvent] {
        self.ledger.events()
    }

    pub fn total_issuance(&self) -> Balance {
        self.ledger.total_issuance()
    }

    pub fn free(&self, who: &AccountId) -> Balance {
        self.ledger.free(who)
    }

    pub fn reserved(&self, who: &AccountId) -> Balance {
        self.ledger.reserved(who)
    }

    pub fn create_account(
        &mut self,
        id: AccountId,
        endowment: Balance,
    ) -> Result<Account, DispatchError> {
        Ok(self.ledger.create_account(id, endowment)?)
    }

    pub fn transfer(
        &mut self,
        from: &AccountId,
        to: &AccountId,
        amount: Balance,
    ) -> Result<(), DispatchError> {
        Ok(self.ledger.transfer(from, to, amount)?)
    }

    /// Advances `n` blocks, running the per-block hooks for each one.
    ///
    /// The deadman hook runs as a block opens, before any dispatch in that
    /// block. The notification hook runs as a block closes, after every
    /// dispatch in it, so an action taken at block `b` suppresses the
    /// reminder that would otherwise be sent at `b`.
    pub fn advance_blocks(&mut self, n: u64) -> BlockNumber {
        for _ in 0..n {
            self.notification_hook();
            self.ledger.next_block();
            self.deadman_hook();
        }
        self.height()
    }

    pub(crate) fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            ledger: self.ledger.snapshot(),
            rest: self.m.clone(),
        }
    }

    pub(crate) fn restore(&mut self, cp: Checkpoint) {
        self.ledger.restore(cp.ledger);
        self.m = cp.rest;
    }

    /// Runs `f`, undoing all of its effects if it fails.
    pub fn transactional<R, E>(
        &mut self,
        f: impl FnOnce(&mut Self) -> Result<R, E>,
    ) -> Result<R, E> {
        let cp = self.checkpoint();
        let result = f(self);
        if result.is_err() {
            self.restore(cp);
        }
        result
    }

    pub fn dispatch(&mut self, origin: Origin, call: Call) -> Result<DispatchOutput, DispatchError> {
        self.transactional(|rt| rt.dispatch_unchecked(origin, call))
    }

    fn dispatch_unchecked(
        &mut self,
        origin: Origin,
        call: Call,
    ) -> Result<DispatchOutput, DispatchError> {
        use DispatchOutput as Out;
        match call {
            Call::CreateAccount { id, endowment } => {
                origin.ensure_root()?;
                self.create_account(id, endowment).map(Out::Account)
            }
            Call::Transfer { to, amount } => {
                let from = origin.signed()?.clone();
                self.transfer(&from, &to, amount).map(|_| Out::Unit)
            }
            Call::AdvanceBlocks { n } => Ok(Out::Height(self.advance_blocks(n))),
            Call::TotalIssuance {} => Ok(Out::Issuance(self.total_issuance())),
            Call::CreateRecovery {
                friends,
                threshold,
                delay_period,
            } => {
                let owner = origin.signed()?.clone();
                self.create_recovery(&owner, friends, threshold, delay_period)
                    .map(Out::Config)
            }
            Call::InitiateRecovery { lost } => {
                let rescuer = origin.signed()?.clone();
                self.initiate_recovery(&rescuer, &lost).map(Out::Active)
            }
            Call::VouchRecovery { lost, rescuer } => {
                let friend = origin.signed()?.clone();
                self.vouch_recovery(&friend, &lost, &rescuer).map(Out::Active)
            }
            Call::ClaimRecovery { lost } => {
                let rescuer = origin.signed()?.clone();
                self.claim_recovery(&rescuer, &lost).map(Out::Binding)
            }
            Call::CloseRecovery { rescuer } => {
                let lost = origin.signed()?.clone();
                self.close_recovery(&lost, &rescuer).map(|_| Out::Unit)
            }
            Call::RemoveRecovery {} => {
                let lost = origin.signed()?.clone();
                self.remove_recovery(&lost).map(|_| Out::Unit)
            }
            Call::AsRecovered { lost, call } => {
                let rescuer = origin.signed()?.clone();
                self.ensure_proxy(&rescuer, &lost)?;
                self.dispatch_unchecked(Origin::Signed(lost), *call)
            }
            Call::RootSetRecovered { lost, rescuer } => self
                .root_set_recovered(&origin, &lost, &rescuer)
                .map(Out::Binding),
            Call::CommitFriend { account, salt } => commit_friend(&account, &salt.0)
                .map(Out::Commitment)
                .map_err(Into::into),
            Call::VouchRecoveryCommitted {
                salt,
                lost,
                rescuer,
            } => {
                let friend = origin.signed()?.clone();
                self.vouch_recovery_committed(&friend, &salt.0, &lost, &rescuer)
                    .map(Out::Active)
            }
            Call::MintSbt { owner, role } => {
                let issuer = origin.signed()?.clone();
                self.mint_sbt(&issuer, &owner, role).map(Out::Token)
            }
            Call::SbtTransfer { token_id, to } => {
                let from = origin.signed()?.clone();
                self.sbt_transfer(token_id, &from, &to).map(|_| Out::Unit)
            }
            Call::SetAttribute {
                token_id,
                key,
                value,
            } => {
                let issuer = origin.signed()?.clone();
                self.set_attribute(&issuer, token_id, key, value)
                    .map(Out::Token)
            }
            Call::VerifyExistence { testator } => {
                self.verify_plan_existence(&testator).map(Out::Existence)
            }
            Call::ArmSwitch {
                liveness_period,
                grace_period,
                action,
            } => {
                let owner = origin.signed()?.clone();
                let grace = grace_period.unwrap_or(self.constants.default_grace_period);
                self.arm_switch(&owner, liveness_period, grace, action)
                    .map(Out::Switch)
            }
            Call::CheckIn {} => {
                let owner = origin.signed()?.clone();
                self.check_in(&owner).map(Out::Switch)
            }
            Call::Disarm {} => {
                let owner = origin.signed()?.clone();
                self.disarm(&owner).map(Out::Switch)
            }
            Call::BuildPlan(spec) => {
                let testator = origin.signed()?.clone();
                self.build_plan(&testator, spec).map(Out::Plan)
            }
            Call::EnactPlan {} => {
                let testator = origin.signed()?.clone();
                self.enact_plan(&testator).map(Out::Config)
            }
            Call::SweepAssets { testator } => {
                let executor = origin.signed()?.clone();
                self.sweep_assets(&executor, &testator).map(Out::Sweep)
            }
        }
    }

    /// JSON state dump: clock, issuance, balances and every module's records.
    pub fn state_dump(&self) -> serde_json::Value {
        #[derive(Serialize)]
        struct Dump<'a> {
            height: BlockNumber,
            #[serde(with = "crate::ledger::amount")]
            total_issuance: Balance,
            accounts: Vec<&'a Account>,
            recovery: &'a RecoveryState,
            tokens: Vec<&'a SoulboundToken>,
            switches: Vec<&'a DeadmanSwitch>,
            plans: Vec<&'a InheritancePlan>,
        }
        let dump = Dump {
            height: self.height(),
            total_issuance: self.total_issuance(),
            accounts: self.ledger.accounts().collect(),
            recovery: &self.m.recovery,
            tokens: self.m.sbts.tokens().collect(),
            switches: self.m.switches.values().collect(),
            plans: self.m.plans.values().collect(),
        };
        serde_json::to_value(dump).expect("state dump serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ledger::acc;

    #[test]
    fn failed_dispatch_leaves_no_trace() {
        let mut rt = Runtime::default();
        rt.create_account(acc("T"), 5).unwrap();
        let before = rt.trace().len();
        let err = rt
            .dispatch(
                Origin::Signed(acc("T")),
                Call::CreateRecovery {
                    friends: vec![FriendRef::Plain(acc("F1"))],
                    threshold: 1,
                    delay_period: 0,
                },
            )
            .unwrap_err();
        assert_eq!(err.id(), "InsufficientFree");
        assert_eq!(rt.trace().len(), before);
        assert!(rt.recovery_config(&acc("T")).is_none());
    }

    #[test]
    fn root_only_calls() {
        let mut rt = Runtime::default();
        let err = rt
            .dispatch(
                Origin::Signed(acc("T")),
                Call::CreateAccount {
                    id: acc("X"),
                    endowment: 1,
                },
            )
            .unwrap_err();
        assert_eq!(err, DispatchError::BadOrigin);
        let err = rt
            .dispatch(Origin::Root, Call::Transfer { to: acc("X"), amount: 1 })
            .unwrap_err();
        assert_eq!(err, DispatchError::BadOrigin);
    }

    #[test]
    fn call_json_shape() {
        let call: Call = serde_json::from_str(
            r#"{"op":"as_recovered","args":{"lost":"T","call":{"op":"transfer","args":{"to":"N","amount":985}}}}"#,
        )
        .unwrap();
        assert_eq!(call.walk().len(), 2);
        assert_eq!(call.walk()[1].name(), "transfer");
        assert!(serde_json::from_str::<Call>(r#"{"op":"explode","args":{}}"#).is_err());
        let names: Vec<_> = Call::NAMES.to_vec();
        assert_eq!(names.len(), 24);
    }

    #[test]
    fn origin_serde() {
        let o: Origin = serde_json::from_str("\"Root\"").unwrap();
        assert_eq!(o, Origin::Root);
        let o: Origin = serde_json::from_str("\"E\"").unwrap();
        assert_eq!(o, Origin::Signed(acc("E")));
        assert!(serde_json::from_str::<Origin>("\"\"").is_err());
    }

    #[test]
    fn advance_blocks_arithmetic() {
        let mut rt = Runtime::default();
        rt.advance_blocks(60);
        assert_eq!(rt.advance_blocks(100), 160);
    }
}
