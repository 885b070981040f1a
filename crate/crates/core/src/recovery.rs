//! Social-recovery state machine.
//!
//! An owner lists friends and a threshold. A rescuer opens a recovery against
//! the owner's account by reserving a deposit; friends vouch; once enough
//! vouches are in and the delay period has elapsed the rescuer claims a proxy
//! binding and may dispatch calls as the lost account. The lost account, or
//! its proxy, can close an open recovery at any time, which hands the
//! rescuer's deposit to the lost account. That is the honeypot: an attacker
//! who opens a recovery against a living owner pays for it.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize, Serializer};

use crate::commit::Commitment32;
use crate::error::{error_ids, DispatchError};
use crate::ledger::{AccountId, Balance, BlockNumber, Event};
use crate::runtime::{Origin, Runtime};

error_ids! {
    pub enum RecoveryError {
        AlreadyRecoverable => "account already has a recovery config",
        NotSorted => "friends must be strictly ascending with no duplicates",
        MixedFriendModes => "friends must be all plain or all committed",
        MaxFriends => "too many friends",
        ThresholdTooLarge => "threshold exceeds the number of friends",
        ZeroThreshold => "threshold must be at least one",
        NotRecoverable => "account has no recovery config",
        AlreadyStarted => "recovery already initiated by this rescuer",
        NotStarted => "no active recovery for this pair",
        NotFriend => "caller is not a listed friend",
        AlreadyVouched => "friend already vouched",
        ModeMismatch => "vouch kind does not match the config's friend mode",
        Threshold => "not enough vouches",
        DelayPeriod => "delay period has not elapsed",
        AlreadyProxy => "rescuer already holds a proxy binding",
        StillActive => "recoveries are still open against this account",
        NotProxy => "caller holds no proxy binding for this account",
    }
}

/// A friend listed in plain or as a salted commitment.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FriendRef {
    Plain(AccountId),
    Committed { commitment: Commitment32 },
}

impl FriendRef {
    pub fn committed(commitment: Commitment32) -> Self {
        FriendRef::Committed { commitment }
    }

    pub fn is_committed(&self) -> bool {
        matches!(self, FriendRef::Committed { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FriendMode {
    Plain,
    Committed,
}

/// Checks mode uniformity and strict ordering. Never reorders the input.
pub fn validate_friends(friends: &[FriendRef]) -> Result<FriendMode, RecoveryError> {
    let committed = friends.iter().filter(|f| f.is_committed()).count();
    let mode = if committed == 0 {
        FriendMode::Plain
    } else if committed == friends.len() {
        FriendMode::Committed
    } else {
        return Err(RecoveryError::MixedFriendModes);
    };
    if friends.windows(2).any(|w| w[0] >= w[1]) {
        return Err(RecoveryError::NotSorted);
    }
    Ok(mode)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RecoveryConfig {
    pub owner: AccountId,
    pub friends: Vec<FriendRef>,
    pub threshold: u32,
    pub delay_period: BlockNumber,
    #[serde(with = "crate::ledger::amount")]
    pub deposit: Balance,
}

impl RecoveryConfig {
    pub fn mode(&self) -> FriendMode {
        match self.friends.first() {
            Some(f) if f.is_committed() => FriendMode::Committed,
            _ => FriendMode::Plain,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ActiveRecovery {
    pub lost: AccountId,
    pub rescuer: AccountId,
    pub created: BlockNumber,
    #[serde(with = "crate::ledger::amount")]
    pub deposit: Balance,
    pub vouched: BTreeSet<AccountId>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct ProxyBinding {
    pub rescuer: AccountId,
    pub lost: AccountId,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct RecoveryState {
    configs: BTreeMap<AccountId, RecoveryConfig>,
    #[serde(serialize_with = "values_only")]
    active: BTreeMap<(AccountId, AccountId), ActiveRecovery>,
    /// rescuer -> lost
    #[serde(serialize_with = "as_bindings")]
    proxies: BTreeMap<AccountId, AccountId>,
}

fn values_only<S: Serializer>(
    map: &BTreeMap<(AccountId, AccountId), ActiveRecovery>,
    s: S,
) -> Result<S::Ok, S::Error> {
    s.collect_seq(map.values())
}

fn as_bindings<S: Serializer>(map: &BTreeMap<AccountId, AccountId>, s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(map.iter().map(|(rescuer, lost)| ProxyBinding {
        rescuer: rescuer.clone(),
        lost: lost.clone(),
    }))
}

impl RecoveryState {
    pub fn config(&self, owner: &AccountId) -> Option<&RecoveryConfig> {
        self.configs.get(owner)
    }

    pub fn active(&self, lost: &AccountId, rescuer: &AccountId) -> Option<&ActiveRecovery> {
        self.active.get(&(lost.clone(), rescuer.clone()))
    }

    pub(crate) fn active_mut(
        &mut self,
        lost: &AccountId,
        rescuer: &AccountId,
    ) -> Option<&mut ActiveRecovery> {
        self.active.get_mut(&(lost.clone(), rescuer.clone()))
    }

    pub fn actives(&self) -> impl Iterator<Item = &ActiveRecovery> {
        self.active.values()
    }

    pub fn actives_against<'a>(
        &'a self,
        lost: &'a AccountId,
    ) -> impl Iterator<Item = &'a ActiveRecovery> + 'a {
        self.active.values().filter(move |a| &a.lost == lost)
    }

    pub fn proxy_of(&self, rescuer: &AccountId) -> Option<&AccountId> {
        self.proxies.get(rescuer)
    }

    pub fn is_proxy(&self, rescuer: &AccountId, lost: &AccountId) -> bool {
        self.proxies.get(rescuer) == Some(lost)
    }

    pub fn bindings(&self) -> impl Iterator<Item = ProxyBinding> + '_ {
        self.proxies.iter().map(|(r, l)| ProxyBinding {
            rescuer: r.clone(),
            lost: l.clone(),
        })
    }

    /// Drops every binding that points at `lost`.
    pub(crate) fn unbind(&mut self, lost: &AccountId) {
        self.proxies.retain(|_, l| l != lost);
    }
}

impl Runtime {
    pub fn recovery(&self) -> &RecoveryState {
        &self.m.recovery
    }

    pub fn recovery_config(&self, owner: &AccountId) -> Option<&RecoveryConfig> {
        self.m.recovery.config(owner)
    }

    pub fn active_recovery(&self, lost: &AccountId, rescuer: &AccountId) -> Option<&ActiveRecovery> {
        self.m.recovery.active(lost, rescuer)
    }

    pub fn create_recovery(
        &mut self,
        owner: &AccountId,
        friends: Vec<FriendRef>,
        threshold: u32,
        delay_period: BlockNumber,
    ) -> Result<RecoveryConfig, DispatchError> {
        self.ledger.ensure_exists(owner)?;
        if self.m.recovery.configs.contains_key(owner) {
            return Err(RecoveryError::AlreadyRecoverable.into());
        }
        if threshold == 0 {
            return Err(RecoveryError::ZeroThreshold.into());
        }
        if friends.len() > self.constants.max_friends as usize {
            return Err(RecoveryError::MaxFriends.into());
        }
        validate_friends(&friends)?;
        if threshold as usize > friends.len() {
            return Err(RecoveryError::ThresholdTooLarge.into());
        }
        let deposit = self
            .constants
            .config_deposit(friends.len())
            .ok_or(crate::ledger::LedgerError::Overflow)?;
        self.ledger.reserve(owner, deposit)?;

        let config = RecoveryConfig {
            owner: owner.clone(),
            friends,
            threshold,
            delay_period,
            deposit,
        };
        self.m.recovery.configs.insert(owner.clone(), config.clone());
        self.ledger.deposit_event(Event::RecoveryCreated {
            owner: owner.clone(),
            friends: config.friends.clone(),
            threshold,
            delay_period,
            deposit,
        });
        Ok(config)
    }

    pub fn initiate_recovery(
        &mut self,
        rescuer: &AccountId,
        lost: &AccountId,
    ) -> Result<ActiveRecovery, DispatchError> {
        if !self.m.recovery.configs.contains_key(lost) {
            return Err(RecoveryError::NotRecoverable.into());
        }
        let key = (lost.clone(), rescuer.clone());
        if self.m.recovery.active.contains_key(&key) {
            return Err(RecoveryError::AlreadyStarted.into());
        }
        let deposit = self.constants.recovery_deposit;
        self.ledger.reserve(rescuer, deposit)?;

        let active = ActiveRecovery {
            lost: lost.clone(),
            rescuer: rescuer.clone(),
            created: self.height(),
            deposit,
            vouched: BTreeSet::new(),
        };
        self.m.recovery.active.insert(key, active.clone());
        self.ledger.deposit_event(Event::RecoveryInitiated {
            lost: lost.clone(),
            rescuer: rescuer.clone(),
            deposit,
        });
        Ok(active)
    }

    pub fn vouch_recovery(
        &mut self,
        friend: &AccountId,
        lost: &AccountId,
        rescuer: &AccountId,
    ) -> Result<ActiveRecovery, DispatchError> {
        if self.m.recovery.active(lost, rescuer).is_none() {
            return Err(RecoveryError::NotStarted.into());
        }
        let config = self
            .m
            .recovery
            .config(lost)
            .ok_or(RecoveryError::NotRecoverable)?;
        if config.mode() != FriendMode::Plain {
            return Err(RecoveryError::ModeMismatch.into());
        }
        let listed = FriendRef::Plain(friend.clone());
        if config.friends.binary_search(&listed).is_err() {
            return Err(RecoveryError::NotFriend.into());
        }
        self.record_vouch(friend, listed, lost, rescuer)
    }

    /// Adds `friend` to the vouched set and emits `public` as the friend's
    /// identity in the trace.
    pub(crate) fn record_vouch(
        &mut self,
        friend: &AccountId,
        public: FriendRef,
        lost: &AccountId,
        rescuer: &AccountId,
    ) -> Result<ActiveRecovery, DispatchError> {
        let active = self
            .m
            .recovery
            .active_mut(lost, rescuer)
            .ok_or(RecoveryError::NotStarted)?;
        if !active.vouched.insert(friend.clone()) {
            return Err(RecoveryError::AlreadyVouched.into());
        }
        let active = active.clone();
        self.ledger.deposit_event(Event::RecoveryVouched {
            lost: lost.clone(),
            rescuer: rescuer.clone(),
            friend: public,
        });
        Ok(active)
    }

    fn is_claimable_at(&self, created: BlockNumber, delay: BlockNumber) -> bool {
        let ready = created.saturating_add(delay);
        #[cfg(test)]
        if self.exclusive_delay_mutant {
            return self.height() > ready;
        }
        self.height() >= ready
    }

    pub fn claim_recovery(
        &mut self,
        rescuer: &AccountId,
        lost: &AccountId,
    ) -> Result<ProxyBinding, DispatchError> {
        let active = self
            .m
            .recovery
            .active(lost, rescuer)
            .ok_or(RecoveryError::NotStarted)?;
        let config = self
            .m
            .recovery
            .config(lost)
            .ok_or(RecoveryError::NotRecoverable)?;
        if !self.is_claimable_at(active.created, config.delay_period) {
            return Err(RecoveryError::DelayPeriod.into());
        }
        if active.vouched.len() < config.threshold as usize {
            return Err(RecoveryError::Threshold.into());
        }
        if self.m.recovery.proxies.contains_key(rescuer) {
            return Err(RecoveryError::AlreadyProxy.into());
        }
        self.m
            .recovery
            .proxies
            .insert(rescuer.clone(), lost.clone());
        self.ledger.deposit_event(Event::RecoveryClaimed {
            lost: lost.clone(),
            rescuer: rescuer.clone(),
        });
        Ok(ProxyBinding {
            rescuer: rescuer.clone(),
            lost: lost.clone(),
        })
    }

    /// Called by the lost account (directly or through its proxy). The
    /// rescuer's deposit always goes to the lost account.
    pub fn close_recovery(
        &mut self,
        lost: &AccountId,
        rescuer: &AccountId,
    ) -> Result<(), DispatchError> {
        let key = (lost.clone(), rescuer.clone());
        let deposit = self
            .m
            .recovery
            .active
            .get(&key)
            .ok_or(RecoveryError::NotStarted)?
            .deposit;
        self.ledger.repatriate_reserved(rescuer, lost, deposit)?;
        self.m.recovery.active.remove(&key);
        self.ledger.deposit_event(Event::RecoveryClosed {
            lost: lost.clone(),
            rescuer: rescuer.clone(),
            deposit,
        });
        Ok(())
    }

    /// Deletes the config, refunds its deposit, and severs every proxy
    /// binding onto `lost`.
    pub fn remove_recovery(&mut self, lost: &AccountId) -> Result<(), DispatchError> {
        let deposit = self
            .m
            .recovery
            .config(lost)
            .ok_or(RecoveryError::NotRecoverable)?
            .deposit;
        if self.m.recovery.actives_against(lost).next().is_some() {
            return Err(RecoveryError::StillActive.into());
        }
        self.ledger.unreserve(lost, deposit)?;
        self.m.recovery.configs.remove(lost);
        self.m.recovery.unbind(lost);
        self.ledger.deposit_event(Event::RecoveryRemoved {
            lost: lost.clone(),
            deposit,
        });
        Ok(())
    }

    pub fn ensure_proxy(&self, rescuer: &AccountId, lost: &AccountId) -> Result<(), DispatchError> {
        if self.m.recovery.is_proxy(rescuer, lost) {
            Ok(())
        } else {
            Err(RecoveryError::NotProxy.into())
        }
    }

    /// Dispatches `call` with `lost` as the signing origin.
    pub fn as_recovered(
        &mut self,
        rescuer: &AccountId,
        lost: &AccountId,
        call: crate::runtime::Call,
    ) -> Result<crate::runtime::DispatchOutput, DispatchError> {
        self.dispatch(
            Origin::Signed(rescuer.clone()),
            crate::runtime::Call::AsRecovered {
                lost: lost.clone(),
                call: Box::new(call),
            },
        )
    }

    /// Governance failsafe: binds `rescuer` to `lost` with no vouches and no delay.
    pub fn root_set_recovered(
        &mut self,
        origin: &Origin,
        lost: &AccountId,
        rescuer: &AccountId,
    ) -> Result<ProxyBinding, DispatchError> {
        origin.ensure_root()?;
        self.ledger.ensure_exists(lost)?;
        self.m
            .recovery
            .proxies
            .insert(rescuer.clone(), lost.clone());
        self.ledger.deposit_event(Event::RootOverride {
            lost: lost.clone(),
            rescuer: rescuer.clone(),
        });
        Ok(ProxyBinding {
            rescuer: rescuer.clone(),
            lost: lost.clone(),
        })
    }
}
