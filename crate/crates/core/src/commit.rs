//! Salted hash commitments that hide friend identities.
//!
//! A Committed-mode recovery config lists digests instead of accounts. A
//! friend proves membership at vouch time by revealing the account and salt
//! that hash to one of the listed digests. The trace records the digest, never
//! the account.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::error::{error_ids, DispatchError};
use crate::ledger::AccountId;
use crate::recovery::{ActiveRecovery, FriendMode, FriendRef, RecoveryError};
use crate::runtime::Runtime;

pub const DOMAIN_TAG: &[u8] = b"inherit-friend-v1";
pub const SALT_LEN: usize = 16;

error_ids! {
    pub enum CommitError {
        BadSaltLength => "salt must be exactly 16 bytes",
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Salt([u8; SALT_LEN]);

impl Salt {
    pub fn from_slice(bytes: &[u8]) -> Result<Self, CommitError> {
        let arr: [u8; SALT_LEN] = bytes.try_into().map_err(|_| CommitError::BadSaltLength)?;
        Ok(Salt(arr))
    }

    pub fn as_bytes(&self) -> &[u8; SALT_LEN] {
        &self.0
    }
}

impl From<[u8; SALT_LEN]> for Salt {
    fn from(bytes: [u8; SALT_LEN]) -> Self {
        Salt(bytes)
    }
}

impl fmt::Debug for Salt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Salt({})", hex::encode(self.0))
    }
}

/// SHA-256 digest committing to one friend.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Commitment32([u8; 32]);

impl Commitment32 {
    pub fn from_bytes(bytes: [u8; 32]) -> Self {
        Commitment32(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }
}

impl fmt::Display for Commitment32 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl fmt::Debug for Commitment32 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Commitment32({})", self.to_hex())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("commitment must be 64 lowercase hex characters")]
pub struct ParseCommitmentError;

impl FromStr for Commitment32 {
    type Err = ParseCommitmentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.len() != 64 || s.bytes().any(|b| b.is_ascii_uppercase()) {
            return Err(ParseCommitmentError);
        }
        let mut out = [0u8; 32];
        hex::decode_to_slice(s, &mut out).map_err(|_| ParseCommitmentError)?;
        Ok(Commitment32(out))
    }
}

impl Serialize for Commitment32 {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Commitment32 {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Raw bytes carried as a hex string in scenario files. Length is checked
/// where the bytes are used, so a wrong-length salt surfaces as
/// `BadSaltLength` at dispatch rather than as a schema error.
#[derive(Clone, PartialEq, Eq, Default)]
pub struct HexBytes(pub Vec<u8>);

impl fmt::Debug for HexBytes {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0x{}", hex::encode(&self.0))
    }
}

impl Serialize for HexBytes {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&hex::encode(&self.0))
    }
}

impl<'de> Deserialize<'de> for HexBytes {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        hex::decode(&s).map(HexBytes).map_err(serde::de::Error::custom)
    }
}

/// `SHA-256(DOMAIN_TAG ‖ account bytes ‖ salt)`.
pub fn commit_friend(account: &AccountId, salt: &[u8]) -> Result<Commitment32, CommitError> {
    let salt = Salt::from_slice(salt)?;
    Ok(commit_with_salt(account, &salt))
}

pub fn commit_with_salt(account: &AccountId, salt: &Salt) -> Commitment32 {
    let mut hasher = Sha256::new();
    hasher.update(DOMAIN_TAG);
    hasher.update(account.as_bytes());
    hasher.update(salt.as_bytes());
    let digest: [u8; 32] = hasher.finalize().into();
    Commitment32(digest)
}

/// True iff `(account, salt)` opens `commitment`.
pub fn verify_opening(commitment: &Commitment32, account: &AccountId, salt: &[u8]) -> bool {
    matches!(commit_friend(account, salt), Ok(c) if &c == commitment)
}

impl Runtime {
    /// Vouch by revealing the opening of one of the config's commitments.
    /// The trace records the commitment only.
    pub fn vouch_recovery_committed(
        &mut self,
        friend: &AccountId,
        salt: &[u8],
        lost: &AccountId,
        rescuer: &AccountId,
    ) -> Result<ActiveRecovery, DispatchError> {
        if self.active_recovery(lost, rescuer).is_none() {
            return Err(RecoveryError::NotStarted.into());
        }
        let config = self
            .recovery_config(lost)
            .ok_or(RecoveryError::NotRecoverable)?;
        if config.mode() != FriendMode::Committed {
            return Err(RecoveryError::ModeMismatch.into());
        }
        let listed = FriendRef::committed(commit_friend(friend, salt)?);
        if config.friends.binary_search(&listed).is_err() {
            return Err(RecoveryError::NotFriend.into());
        }
        self.record_vouch(friend, listed, lost, rescuer)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ledger::acc;

    const S: [u8; 16] = *b"0123456789abcdef";

    #[test]
    fn deterministic() {
        let a = commit_friend(&acc("F1"), &S).unwrap();
        let b = commit_friend(&acc("F1"), &S).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn distinct_inputs_distinct_digests() {
        let base = commit_friend(&acc("F1"), &S).unwrap();
        assert_ne!(base, commit_friend(&acc("F2"), &S).unwrap());
        let mut other = S;
        other[15] ^= 1;
        assert_ne!(base, commit_friend(&acc("F1"), &other).unwrap());
    }

    #[test]
    fn salt_length_is_enforced() {
        assert_eq!(
            commit_friend(&acc("F1"), &[0u8; 15]),
            Err(CommitError::BadSaltLength)
        );
        assert_eq!(
            commit_friend(&acc("F1"), &[0u8; 17]),
            Err(CommitError::BadSaltLength)
        );
    }

    #[test]
    fn hex_round_trip_and_case() {
        let c = commit_friend(&acc("F1"), &S).unwrap();
        let parsed: Commitment32 = c.to_hex().parse().unwrap();
        assert_eq!(parsed, c);
        let upper = c.to_hex().to_uppercase();
        if upper != c.to_hex() {
            assert!(upper.parse::<Commitment32>().is_err());
        }
        assert!("abcd".parse::<Commitment32>().is_err());
    }

    fn committed_setup() -> (Runtime, [u8; 16]) {
        let mut rt = Runtime::default();
        rt.create_account(acc("T"), 1000).unwrap();
        rt.create_account(acc("E"), 100).unwrap();
        let salt = S;
        let mut friends: Vec<FriendRef> = ["F1", "F2", "F3"]
            .iter()
            .map(|f| FriendRef::committed(commit_friend(&acc(f), &salt).unwrap()))
            .collect();
        friends.sort();
        rt.create_recovery(&acc("T"), friends, 2, 10).unwrap();
        rt.initiate_recovery(&acc("E"), &acc("T")).unwrap();
        (rt, salt)
    }

    #[test]
    fn committed_vouch_examples() {
        let (mut rt, salt) = committed_setup();
        let (t, e, f1) = (acc("T"), acc("E"), acc("F1"));
        let a = rt.vouch_recovery_committed(&f1, &salt, &t, &e).unwrap();
        assert!(a.vouched.contains(&f1));
        assert_eq!(
            rt.vouch_recovery_committed(&f1, &salt, &t, &e),
            Err(RecoveryError::AlreadyVouched.into())
        );
        assert_eq!(
            rt.vouch_recovery_committed(&acc("F2"), &[9u8; 16], &t, &e),
            Err(RecoveryError::NotFriend.into())
        );
        assert_eq!(
            rt.vouch_recovery_committed(&acc("F2"), &[9u8; 4], &t, &e),
            Err(CommitError::BadSaltLength.into())
        );
        assert_eq!(
            rt.vouch_recovery_committed(&acc("F2"), &salt, &t, &acc("F9")),
            Err(RecoveryError::NotStarted.into())
        );
        // plain vouching is refused in committed mode
        assert_eq!(
            rt.vouch_recovery(&acc("F2"), &t, &e),
            Err(RecoveryError::ModeMismatch.into())
        );
        let last = rt.trace().last().unwrap().to_json();
        assert!(!last.contains("\"F1\""));
        assert!(last.contains(&commit_friend(&f1, &salt).unwrap().to_hex()));
    }

    #[test]
    fn plain_config_rejects_committed_vouch() {
        let mut rt = Runtime::default();
        rt.create_account(acc("T"), 1000).unwrap();
        rt.create_account(acc("E"), 100).unwrap();
        rt.create_recovery(&acc("T"), vec![FriendRef::Plain(acc("F1"))], 1, 0)
            .unwrap();
        rt.initiate_recovery(&acc("E"), &acc("T")).unwrap();
        assert_eq!(
            rt.vouch_recovery_committed(&acc("F1"), &S, &acc("T"), &acc("E")),
            Err(RecoveryError::ModeMismatch.into())
        );
    }

    #[test]
    fn verify_opening_requires_both_parts() {
        let c = commit_friend(&acc("F1"), &S).unwrap();
        assert!(verify_opening(&c, &acc("F1"), &S));
        assert!(!verify_opening(&c, &acc("F2"), &S));
        assert!(!verify_opening(&c, &acc("F1"), &[0u8; 16]));
        assert!(!verify_opening(&c, &acc("F1"), &[0u8; 3]));
    }
}
