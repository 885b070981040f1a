//! Deterministic digital-inheritance engine.
//!
//! A simulated ledger with a social-recovery state machine on top, extended
//! with salted friend commitments, soulbound role credentials, a deadman's
//! switch, and an inheritance layer that turns a testator's plan into a
//! recovery config and sweeps the estate to beneficiaries.
//!
//! Everything is driven through [`Runtime::dispatch`], and scenario files are
//! replayed by [`sim::run`].

pub mod check;
pub mod commit;
pub mod deadman;
pub mod error;
pub mod inheritance;
pub mod ledger;
pub mod recovery;
pub mod runtime;
pub mod sbt;
pub mod sim;

pub use commit::{commit_friend, Commitment32, HexBytes, Salt};
pub use deadman::{DeadmanAction, DeadmanSwitch, SwitchState};
pub use error::DispatchError;
pub use inheritance::{apportion, Beneficiary, InheritancePlan, PlanSpec, Share, SweepReport};
pub use ledger::{AccountId, Balance, BlockNumber, Event, TraceEvent};
pub use recovery::{ActiveRecovery, FriendRef, ProxyBinding, RecoveryConfig};
pub use runtime::{Call, Constants, DispatchOutput, Origin, Runtime};
pub use sbt::{Role, SoulboundToken, TokenId};
