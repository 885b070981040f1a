//! Dispatch errors.
//!
//! Every module owns a unit-only error enum. The variant name is the
//! identifier that scenarios expect and traces print, so renaming a variant
//! is a breaking change to the scenario format.

use thiserror::Error;

/// Declares a unit-only error enum whose variant names double as stable
/// string identifiers.
macro_rules! error_ids {
    (
        $(#[$meta:meta])*
        pub enum $name:ident {
            $( $variant:ident => $msg:literal ),* $(,)?
        }
    ) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, thiserror::Error)]
        pub enum $name {
            $( #[error($msg)] $variant ),*
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$( $name::$variant ),*];

            pub fn id(&self) -> &'static str {
                match self {
                    $( $name::$variant => stringify!($variant) ),*
                }
            }
        }
    };
}

pub(crate) use error_ids;

use crate::commit::CommitError;
use crate::deadman::DeadmanError;
use crate::inheritance::InheritanceError;
use crate::ledger::LedgerError;
use crate::recovery::RecoveryError;
use crate::sbt::SbtError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum DispatchError {
    #[error("origin is not permitted to make this call")]
    BadOrigin,
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error(transparent)]
    Recovery(#[from] RecoveryError),
    #[error(transparent)]
    Commit(#[from] CommitError),
    #[error(transparent)]
    Sbt(#[from] SbtError),
    #[error(transparent)]
    Deadman(#[from] DeadmanError),
    #[error(transparent)]
    Inheritance(#[from] InheritanceError),
}

impl DispatchError {
    pub fn id(&self) -> &'static str {
        match self {
            DispatchError::BadOrigin => "BadOrigin",
            DispatchError::Ledger(e) => e.id(),
            DispatchError::Recovery(e) => e.id(),
            DispatchError::Commit(e) => e.id(),
            DispatchError::Sbt(e) => e.id(),
            DispatchError::Deadman(e) => e.id(),
            DispatchError::Inheritance(e) => e.id(),
        }
    }

    /// Every identifier a dispatch can fail with.
    pub fn all_ids() -> Vec<&'static str> {
        let mut ids = vec!["BadOrigin"];
        ids.extend(LedgerError::ALL.iter().map(|e| e.id()));
        ids.extend(RecoveryError::ALL.iter().map(|e| e.id()));
        ids.extend(CommitError::ALL.iter().map(|e| e.id()));
        ids.extend(SbtError::ALL.iter().map(|e| e.id()));
        ids.extend(DeadmanError::ALL.iter().map(|e| e.id()));
        ids.extend(InheritanceError::ALL.iter().map(|e| e.id()));
        ids
    }
}
