//! Simulated single-chain ledger.
//!
//! Accounts carry a free and a reserved component. Reserved funds model
//! refundable deposits: they still count toward the owner's total but cannot
//! be spent until unreserved or repatriated. Every mutation appends a
//! [`TraceEvent`] stamped with the current block height and a ledger-wide
//! sequence number, which makes the trace a total order suitable for golden
//! comparisons.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::error_ids;
use crate::inheritance::SweepReport;
use crate::recovery::FriendRef;
use crate::sbt::{Role, TokenId};

/// Smallest currency units.
pub type Balance = u128;

/// Serde for `Balance` fields. A JSON number while it fits in a `u64`, a
/// decimal string beyond that. Either form is accepted on input. Tagged and
/// flattened types are buffered by serde, and the buffer cannot hold a `u128`.
pub mod amount {
    use std::fmt;

    use serde::de::{self, Visitor};
    use serde::{Deserializer, Serializer};

    use super::Balance;

    pub fn serialize<S: Serializer>(value: &Balance, serializer: S) -> Result<S::Ok, S::Error> {
        match u64::try_from(*value) {
            Ok(small) => serializer.serialize_u64(small),
            Err(_) => serializer.collect_str(value),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> Result<Balance, D::Error> {
        struct AmountVisitor;

        impl Visitor<'_> for AmountVisitor {
            type Value = Balance;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a non-negative integer or a decimal string")
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Balance, E> {
                Ok(v.into())
            }

            fn visit_u128<E: de::Error>(self, v: u128) -> Result<Balance, E> {
                Ok(v)
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Balance, E> {
                Balance::try_from(v).map_err(|_| E::custom("amount must be non-negative"))
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<Balance, E> {
                if v.is_empty() || !v.bytes().all(|b| b.is_ascii_digit()) {
                    return Err(E::custom("amount string must be decimal digits"));
                }
                v.parse().map_err(E::custom)
            }
        }

        deserializer.deserialize_any(AmountVisitor)
    }
}

pub type BlockNumber = u64;

error_ids! {
    pub enum LedgerError {
        DuplicateAccount => "account already exists",
        UnknownAccount => "account does not exist",
        InsufficientFree => "free balance too low",
        InsufficientReserved => "reserved balance too low",
        Overflow => "balance arithmetic overflowed",
    }
}

/// Label identifying an account. Ordered by byte comparison.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct AccountId(String);

/// The label reserved for the governance origin in scenario files.
pub const ROOT_LABEL: &str = "Root";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum InvalidAccountId {
    #[error("account id must not be empty")]
    Empty,
    #[error("account id `Root` is reserved for the governance origin")]
    Reserved,
}

impl AccountId {
    pub fn new(label: impl Into<String>) -> Result<Self, InvalidAccountId> {
        let label = label.into();
        if label.is_empty() {
            return Err(InvalidAccountId::Empty);
        }
        if label == ROOT_LABEL {
            return Err(InvalidAccountId::Reserved);
        }
        Ok(AccountId(label))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn as_bytes(&self) -> &[u8] {
        self.0.as_bytes()
    }
}

impl TryFrom<String> for AccountId {
    type Error = InvalidAccountId;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        AccountId::new(value)
    }
}

impl From<AccountId> for String {
    fn from(id: AccountId) -> String {
        id.0
    }
}

impl fmt::Display for AccountId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for AccountId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Shorthand for building ids in tests and fixtures. Panics on an invalid label.
pub fn acc(label: &str) -> AccountId {
    AccountId::new(label).expect("valid account label")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Account {
    pub id: AccountId,
    #[serde(with = "crate::ledger::amount")]
    pub free: Balance,
    #[serde(with = "crate::ledger::amount")]
    pub reserved: Balance,
}

impl Account {
    pub fn total(&self) -> Balance {
        self.free + self.reserved
    }
}

/// Everything the engine can record in its trace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload")]
pub enum Event {
    AccountCreated {
        who: AccountId,
        #[serde(with = "crate::ledger::amount")]
        endowment: Balance,
    },
    Transferred {
        from: AccountId,
        to: AccountId,
        #[serde(with = "crate::ledger::amount")]
        amount: Balance,
    },
    Reserved {
        who: AccountId,
        #[serde(with = "crate::ledger::amount")]
        amount: Balance,
    },
    Unreserved {
        who: AccountId,
        #[serde(with = "crate::ledger::amount")]
        amount: Balance,
    },
    ReserveRepatriated {
        from: AccountId,
        to: AccountId,
        #[serde(with = "crate::ledger::amount")]
        amount: Balance,
    },
    RecoveryCreated {
        owner: AccountId,
        friends: Vec<FriendRef>,
        threshold: u32,
        delay_period: BlockNumber,
        #[serde(with = "crate::ledger::amount")]
        deposit: Balance,
    },
    RecoveryInitiated {
        lost: AccountId,
        rescuer: AccountId,
        #[serde(with = "crate::ledger::amount")]
        deposit: Balance,
    },
    RecoveryVouched {
        lost: AccountId,
        rescuer: AccountId,
        friend: FriendRef,
    },
    RecoveryClaimed {
        lost: AccountId,
        rescuer: AccountId,
    },
    RecoveryClosed {
        lost: AccountId,
        rescuer: AccountId,
        #[serde(with = "crate::ledger::amount")]
        deposit: Balance,
    },
    RecoveryRemoved {
        lost: AccountId,
        #[serde(with = "crate::ledger::amount")]
        deposit: Balance,
    },
    ReminderSent {
        lost: AccountId,
        rescuer: AccountId,
        recipients: Vec<AccountId>,
        initiated: BlockNumber,
    },
    DeadmanAlert {
        owner: AccountId,
        last_checkin: BlockNumber,
    },
    DeadmanFired {
        owner: AccountId,
        initiated: Option<AccountId>,
        failure: Option<String>,
    },
    SbtMinted {
        token_id: TokenId,
        issuer: AccountId,
        owner: AccountId,
        role: Role,
    },
    SbtAttributeSet {
        token_id: TokenId,
        key: String,
        value: String,
    },
    SweepCompleted(SweepReport),
    RootOverride {
        lost: AccountId,
        rescuer: AccountId,
    },
}

impl Event {
    pub fn kind(&self) -> &'static str {
        match self {
            Event::AccountCreated { .. } => "AccountCreated",
            Event::Transferred { .. } => "Transferred",
            Event::Reserved { .. } => "Reserved",
            Event::Unreserved { .. } => "Unreserved",
            Event::ReserveRepatriated { .. } => "ReserveRepatriated",
            Event::RecoveryCreated { .. } => "RecoveryCreated",
            Event::RecoveryInitiated { .. } => "RecoveryInitiated",
            Event::RecoveryVouched { .. } => "RecoveryVouched",
            Event::RecoveryClaimed { .. } => "RecoveryClaimed",
            Event::RecoveryClosed { .. } => "RecoveryClosed",
            Event::RecoveryRemoved { .. } => "RecoveryRemoved",
            Event::ReminderSent { .. } => "ReminderSent",
            Event::DeadmanAlert { .. } => "DeadmanAlert",
            Event::DeadmanFired { .. } => "DeadmanFired",
            Event::SbtMinted { .. } => "SbtMinted",
            Event::SbtAttributeSet { .. } => "SbtAttributeSet",
            Event::SweepCompleted(_) => "SweepCompleted",
            Event::RootOverride { .. } => "RootOverride",
        }
    }

    pub const KINDS: &'static [&'static str] = &[
        "AccountCreated",
        "Transferred",
        "Reserved",
        "Unreserved",
        "ReserveRepatriated",
        "RecoveryCreated",
        "RecoveryInitiated",
        "RecoveryVouched",
        "RecoveryClaimed",
        "RecoveryClosed",
        "RecoveryRemoved",
        "ReminderSent",
        "DeadmanAlert",
        "DeadmanFired",
        "SbtMinted",
        "SbtAttributeSet",
        "SweepCompleted",
        "RootOverride",
    ];
}

/// One trace line. Serializes with fields in the order `block, seq, kind, payload`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub block: BlockNumber,
    pub seq: u64,
    #[serde(flatten)]
    pub event: Event,
}

impl TraceEvent {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("trace events always serialize")
    }
}

/// Serializes a trace as JSON lines, one event per line, each terminated by `\n`.
pub fn trace_to_json_lines(trace: &[TraceEvent]) -> String {
    let mut out = String::new();
    for ev in trace {
        out.push_str(&ev.to_json());
        out.push('\n');
    }
    out
}

pub fn trace_from_json_lines(text: &str) -> Result<Vec<TraceEvent>, serde_json::Error> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect()
}

/// Balances and clock at a point in time. Events are append-only, so only
/// their count is kept.
#[derive(Debug, Clone)]
pub(crate) struct LedgerSnapshot {
    height: BlockNumber,
    accounts: BTreeMap<AccountId, Account>,
    events_len: usize,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Ledger {
    height: BlockNumber,
    accounts: BTreeMap<AccountId, Account>,
    #[serde(skip)]
    events: Vec<TraceEvent>,
}

impl Ledger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn height(&self) -> BlockNumber {
        self.height
    }

    pub fn events(&self) -> &[TraceEvent] {
        &self.events
    }

    pub fn account(&self, who: &AccountId) -> Option<&Account> {
        self.accounts.get(who)
    }

    pub fn accounts(&self) -> impl Iterator<Item = &Account> {
        self.accounts.values()
    }

    pub fn exists(&self, who: &AccountId) -> bool {
        self.accounts.contains_key(who)
    }

    pub fn free(&self, who: &AccountId) -> Balance {
        self.accounts.get(who).map_or(0, |a| a.free)
    }

    pub fn reserved(&self, who: &AccountId) -> Balance {
        self.accounts.get(who).map_or(0, |a| a.reserved)
    }

    pub fn ensure_exists(&self, who: &AccountId) -> Result<(), LedgerError> {
        if self.exists(who) {
            Ok(())
        } else {
            Err(LedgerError::UnknownAccount)
        }
    }

    pub fn deposit_event(&mut self, event: Event) {
        let seq = self.events.len() as u64;
        self.events.push(TraceEvent {
            block: self.height,
            seq,
            event,
        });
    }

    pub fn create_account(
        &mut self,
        id: AccountId,
        endowment: Balance,
    ) -> Result<Account, LedgerError> {
        if self.accounts.contains_key(&id) {
            return Err(LedgerError::DuplicateAccount);
        }
        self.total_issuance()
            .checked_add(endowment)
            .ok_or(LedgerError::Overflow)?;
        let account = Account {
            id: id.clone(),
            free: endowment,
            reserved: 0,
        };
        self.accounts.insert(id.clone(), account.clone());
        self.deposit_event(Event::AccountCreated {
            who: id,
            endowment,
        });
        Ok(account)
    }

    pub fn transfer(
        &mut self,
        from: &AccountId,
        to: &AccountId,
        amount: Balance,
    ) -> Result<(), LedgerError> {
        let source = self.accounts.get(from).ok_or(LedgerError::UnknownAccount)?;
        let dest = self.accounts.get(to).ok_or(LedgerError::UnknownAccount)?;
        if source.free < amount {
            return Err(LedgerError::InsufficientFree);
        }
        if from != to {
            let new_dest = dest.free.checked_add(amount).ok_or(LedgerError::Overflow)?;
            self.accounts.get_mut(from).expect("checked").free -= amount;
            self.accounts.get_mut(to).expect("checked").free = new_dest;
        }
        self.deposit_event(Event::Transferred {
            from: from.clone(),
            to: to.clone(),
            amount,
        });
        Ok(())
    }

    pub fn reserve(&mut self, who: &AccountId, amount: Balance) -> Result<(), LedgerError> {
        let account = self.accounts.get_mut(who).ok_or(LedgerError::UnknownAccount)?;
        if account.free < amount {
            return Err(LedgerError::InsufficientFree);
        }
        account.free -= amount;
        account.reserved += amount;
        self.deposit_event(Event::Reserved {
            who: who.clone(),
            amount,
        });
        Ok(())
    }

    pub fn unreserve(&mut self, who: &AccountId, amount: Balance) -> Result<(), LedgerError> {
        let account = self.accounts.get_mut(who).ok_or(LedgerError::UnknownAccount)?;
        if account.reserved < amount {
            return Err(LedgerError::InsufficientReserved);
        }
        account.reserved -= amount;
        account.free += amount;
        self.deposit_event(Event::Unreserved {
            who: who.clone(),
            amount,
        });
        Ok(())
    }

    /// Moves `amount` out of `from`'s reserved balance into `to`'s free balance.
    pub fn repatriate_reserved(
        &mut self,
        from: &AccountId,
        to: &AccountId,
        amount: Balance,
    ) -> Result<(), LedgerError> {
        let source = self.accounts.get(from).ok_or(LedgerError::UnknownAccount)?;
        let dest = self.accounts.get(to).ok_or(LedgerError::UnknownAccount)?;
        if source.reserved < amount {
            return Err(LedgerError::InsufficientReserved);
        }
        let new_dest = if from == to {
            dest.free + amount
        } else {
            dest.free.checked_add(amount).ok_or(LedgerError::Overflow)?
        };
        self.accounts.get_mut(from).expect("checked").reserved -= amount;
        self.accounts.get_mut(to).expect("checked").free = new_dest;
        self.deposit_event(Event::ReserveRepatriated {
            from: from.clone(),
            to: to.clone(),
            amount,
        });
        Ok(())
    }

    /// Sum of free and reserved over every account.
    pub fn total_issuance(&self) -> Balance {
        self.accounts.values().map(Account::total).sum()
    }

    /// Opens the next block. Hooks are the runtime's business, not the ledger's.
    pub(crate) fn next_block(&mut self) -> BlockNumber {
        self.height += 1;
        self.height
    }

    pub(crate) fn snapshot(&self) -> LedgerSnapshot {
        LedgerSnapshot {
            height: self.height,
            accounts: self.accounts.clone(),
            events_len: self.events.len(),
        }
    }

    pub(crate) fn restore(&mut self, snap: LedgerSnapshot) {
        self.height = snap.height;
        self.accounts = snap.accounts;
        self.events.truncate(snap.events_len);
    }

    /// Advances the clock without running any hooks.
    pub fn advance_blocks(&mut self, n: u64) -> BlockNumber {
        self.height += n;
        self.height
    }
}
