//! Inheritance planning on top of the recovery machine.
//!
//! A testator builds a plan naming an executor, guardians and beneficiaries,
//! then enacts it as an ordinary recovery config. Once the executor has
//! claimed the testator's account, `sweep_assets` closes out the recovery and
//! pays the whole estate to the beneficiaries in one transactional call.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use num_traits::{CheckedAdd, One, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{error_ids, DispatchError};
use crate::ledger::{AccountId, Balance, BlockNumber, Event};
use crate::recovery::{validate_friends, FriendMode, FriendRef, RecoveryConfig, RecoveryError};
use crate::runtime::Runtime;
use crate::sbt::required_credentials;

error_ids! {
    pub enum InheritanceError {
        SharesDontSumToOne => "beneficiary shares must sum to exactly one",
        InvalidShare => "every share must be strictly positive",
        DuplicateBeneficiary => "a beneficiary is listed twice",
        DuplicateGuardian => "a guardian is listed twice",
        NoGuardians => "a plan needs at least one guardian",
        PlanExists => "testator already has a plan",
        NoPlan => "testator has no plan",
        ZeroCadence => "notification cadence must be at least one block",
        RoundingImpossible => "apportionment could not account for the whole estate",
        EstateReserved => "estate still has reserved funds after the recovery was removed",
    }
}

/// A beneficiary's fraction of the estate, kept in lowest terms.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Share(Ratio<u64>);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("share must look like \"n/d\" with d > 0")]
pub struct ParseShareError;

impl Share {
    pub fn new(numer: u64, denom: u64) -> Result<Self, ParseShareError> {
        if denom == 0 {
            return Err(ParseShareError);
        }
        Ok(Share(Ratio::new(numer, denom)))
    }

    pub fn numer(&self) -> u64 {
        *self.0.numer()
    }

    pub fn denom(&self) -> u64 {
        *self.0.denom()
    }

    pub fn ratio(&self) -> Ratio<u64> {
        self.0
    }
}

impl fmt::Display for Share {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.numer(), self.denom())
    }
}

impl fmt::Debug for Share {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Share({self})")
    }
}

impl FromStr for Share {
    type Err = ParseShareError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (n, d) = s.split_once('/').unwrap_or((s, "1"));
        let n = n.trim().parse().map_err(|_| ParseShareError)?;
        let d = d.trim().parse().map_err(|_| ParseShareError)?;
        Share::new(n, d)
    }
}

impl Serialize for Share {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Share {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Beneficiary {
    pub account: AccountId,
    pub share: Share,
}

/// What the testator submits to `build_plan`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanSpec {
    pub executor: AccountId,
    pub guardians: Vec<FriendRef>,
    pub threshold: u32,
    pub delay_period: BlockNumber,
    pub beneficiaries: Vec<Beneficiary>,
    #[serde(default)]
    pub executor_is_friend: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notification_cadence: Option<BlockNumber>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InheritancePlan {
    pub testator: AccountId,
    pub executor: AccountId,
    pub guardians: Vec<FriendRef>,
    pub threshold: u32,
    pub delay_period: BlockNumber,
    pub beneficiaries: Vec<Beneficiary>,
    pub executor_is_friend: bool,
    pub notification_cadence: Option<BlockNumber>,
}

impl InheritancePlan {
    /// Guardians plus the executor when it doubles as a friend, sorted and
    /// deduplicated, ready for `create_recovery`.
    pub fn friend_set(&self) -> Vec<FriendRef> {
        let mut set: BTreeSet<FriendRef> = self.guardians.iter().cloned().collect();
        if self.executor_is_friend {
            set.insert(FriendRef::Plain(self.executor.clone()));
        }
        set.into_iter().collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NotificationRule {
    pub executor: AccountId,
    pub cadence: BlockNumber,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Payout {
    pub account: AccountId,
    #[serde(with = "crate::ledger::amount")]
    pub amount: Balance,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SweepReport {
    pub old_account: AccountId,
    pub distributed: Vec<Payout>,
    pub dust_recipient: AccountId,
    #[serde(with = "crate::ledger::amount")]
    pub total_moved: Balance,
}

/// Splits `total` by `shares` with the largest-remainder method.
///
/// Everyone first gets `floor(share * total)`. The units left over go one
/// each to the largest fractional remainders, ties to the earlier entry.
/// Returns the amounts and the indices that received a leftover unit, in the
/// order they received it.
pub fn apportion(
    total: Balance,
    shares: &[Share],
) -> Result<(Vec<Balance>, Vec<usize>), InheritanceError> {
    // floor(total * n / d) without overflow: total = q*d + r, so
    // total*n/d = q*n + r*n/d with r*n < 2^128 and q*n <= total.
    let parts: Vec<(Balance, Balance, Balance)> = shares
        .iter()
        .map(|s| {
            let (n, d) = (Balance::from(s.numer()), Balance::from(s.denom()));
            let (q, r) = (total / d, total % d);
            let rn = r * n;
            (q * n + rn / d, rn % d, d)
        })
        .collect();

    let floored = parts
        .iter()
        .try_fold(0u128, |acc, (f, _, _)| acc.checked_add(*f))
        .ok_or(InheritanceError::RoundingImpossible)?;
    let leftover = total
        .checked_sub(floored)
        .ok_or(InheritanceError::RoundingImpossible)?;
    if leftover > shares.len() as Balance {
        return Err(InheritanceError::RoundingImpossible);
    }

    let mut order: Vec<usize> = (0..parts.len()).collect();
    // rem_i/d_i versus rem_j/d_j; both cross products stay below 2^128.
    order.sort_by(|&i, &j| {
        let (_, ri, di) = parts[i];
        let (_, rj, dj) = parts[j];
        match (rj * di).cmp(&(ri * dj)) {
            Ordering::Equal => i.cmp(&j),
            other => other,
        }
    });
    let lucky: Vec<usize> = order.into_iter().take(leftover as usize).collect();

    let mut amounts: Vec<Balance> = parts.iter().map(|(f, _, _)| *f).collect();
    for &i in &lucky {
        amounts[i] += 1;
    }
    Ok((amounts, lucky))
}

fn check_shares(beneficiaries: &[Beneficiary]) -> Result<(), InheritanceError> {
    let mut seen = BTreeSet::new();
    let mut sum = Ratio::<u128>::zero();
    for b in beneficiaries {
        if b.share.numer() == 0 {
            return Err(InheritanceError::InvalidShare);
        }
        if !seen.insert(&b.account) {
            return Err(InheritanceError::DuplicateBeneficiary);
        }
        let share = Ratio::new(b.share.numer().into(), b.share.denom().into());
        sum = sum
            .checked_add(&share)
            .ok_or(InheritanceError::SharesDontSumToOne)?;
    }
    if sum != Ratio::one() {
        return Err(InheritanceError::SharesDontSumToOne);
    }
    Ok(())
}

impl Runtime {
    pub fn plan(&self, testator: &AccountId) -> Option<&InheritancePlan> {
        self.m.plans.get(testator)
    }

    pub fn notification_rule(&self, testator: &AccountId) -> Option<&NotificationRule> {
        self.m.notifications.get(testator)
    }

    /// Validates and stores a plan, then mints the role credentials it
    /// names, all issued by the testator.
    pub fn build_plan(
        &mut self,
        testator: &AccountId,
        spec: PlanSpec,
    ) -> Result<InheritancePlan, DispatchError> {
        if self.m.plans.contains_key(testator) {
            return Err(InheritanceError::PlanExists.into());
        }
        self.ledger.ensure_exists(testator)?;
        self.ledger.ensure_exists(&spec.executor)?;
        for g in &spec.guardians {
            if let FriendRef::Plain(id) = g {
                self.ledger.ensure_exists(id)?;
            }
        }
        for b in &spec.beneficiaries {
            self.ledger.ensure_exists(&b.account)?;
        }

        if spec.guardians.is_empty() {
            return Err(InheritanceError::NoGuardians.into());
        }
        let distinct: BTreeSet<&FriendRef> = spec.guardians.iter().collect();
        if distinct.len() != spec.guardians.len() {
            return Err(InheritanceError::DuplicateGuardian.into());
        }
        let mut sorted = spec.guardians.clone();
        sorted.sort();
        let mode = validate_friends(&sorted)?;
        if mode == FriendMode::Committed && spec.executor_is_friend {
            return Err(RecoveryError::MixedFriendModes.into());
        }

        let plan = InheritancePlan {
            testator: testator.clone(),
            executor: spec.executor,
            guardians: spec.guardians,
            threshold: spec.threshold,
            delay_period: spec.delay_period,
            beneficiaries: spec.beneficiaries,
            executor_is_friend: spec.executor_is_friend,
            notification_cadence: spec.notification_cadence,
        };
        let friends = plan.friend_set().len();
        if friends > self.constants.max_friends as usize {
            return Err(RecoveryError::MaxFriends.into());
        }
        if plan.threshold == 0 {
            return Err(RecoveryError::ZeroThreshold.into());
        }
        if plan.threshold as usize > friends {
            return Err(RecoveryError::ThresholdTooLarge.into());
        }
        check_shares(&plan.beneficiaries)?;
        if plan.notification_cadence == Some(0) {
            return Err(InheritanceError::ZeroCadence.into());
        }

        for (owner, role) in required_credentials(&plan) {
            self.mint_sbt(testator, &owner, role)?;
        }
        self.m.plans.insert(testator.clone(), plan.clone());
        Ok(plan)
    }

    /// Turns the stored plan into a recovery config and registers its
    /// reminder cadence, if any.
    pub fn enact_plan(&mut self, testator: &AccountId) -> Result<RecoveryConfig, DispatchError> {
        let plan = self
            .m
            .plans
            .get(testator)
            .ok_or(InheritanceError::NoPlan)?
            .clone();
        let config =
            self.create_recovery(testator, plan.friend_set(), plan.threshold, plan.delay_period)?;
        if let Some(cadence) = plan.notification_cadence {
            self.m.notifications.insert(
                testator.clone(),
                NotificationRule {
                    executor: plan.executor,
                    cadence,
                },
            );
        }
        Ok(config)
    }

    /// Closes the claimed recovery, removes the config and pays the whole
    /// estate out to the beneficiaries. Nothing happens unless every step
    /// succeeds.
    pub fn sweep_assets(
        &mut self,
        executor: &AccountId,
        testator: &AccountId,
    ) -> Result<SweepReport, DispatchError> {
        self.transactional(|rt| rt.sweep_unchecked(executor, testator))
    }

    fn sweep_unchecked(
        &mut self,
        executor: &AccountId,
        testator: &AccountId,
    ) -> Result<SweepReport, DispatchError> {
        self.ensure_proxy(executor, testator)?;
        let plan = self
            .m
            .plans
            .get(testator)
            .ok_or(InheritanceError::NoPlan)?
            .clone();

        if self.m.recovery.active(testator, executor).is_some() {
            self.close_recovery(testator, executor)?;
        }
        if self.m.recovery.actives_against(testator).next().is_some() {
            return Err(RecoveryError::StillActive.into());
        }
        if self.m.recovery.config(testator).is_some() {
            self.remove_recovery(testator)?;
        } else {
            self.m.recovery.unbind(testator);
        }
        self.m.notifications.remove(testator);
        if self.ledger.reserved(testator) != 0 {
            return Err(InheritanceError::EstateReserved.into());
        }

        let estate = self.ledger.free(testator);
        let shares: Vec<Share> = plan.beneficiaries.iter().map(|b| b.share).collect();
        let (amounts, lucky) = apportion(estate, &shares)?;
        let dust_recipient = lucky
            .first()
            .map_or(&plan.beneficiaries[0].account, |&i| {
                &plan.beneficiaries[i].account
            })
            .clone();

        let mut distributed = Vec::new();
        for (b, amount) in plan.beneficiaries.iter().zip(amounts) {
            if amount == 0 {
                continue;
            }
            self.ledger.transfer(testator, &b.account, amount)?;
            distributed.push(Payout {
                account: b.account.clone(),
                amount,
            });
        }
        let total_moved = distributed.iter().map(|p| p.amount).sum();
        if total_moved != estate {
            return Err(InheritanceError::RoundingImpossible.into());
        }

        let report = SweepReport {
            old_account: testator.clone(),
            distributed,
            dust_recipient,
            total_moved,
        };
        self.ledger
            .deposit_event(Event::SweepCompleted(report.clone()));
        Ok(report)
    }

    /// Runs as each block closes.
    pub(crate) fn notification_hook(&mut self) {
        let height = self.height();
        let due: Vec<Event> = self
            .m
            .recovery
            .actives()
            .filter(|a| !self.m.recovery.is_proxy(&a.rescuer, &a.lost))
            .filter_map(|a| {
                let rule = self.m.notifications.get(&a.lost)?;
                let elapsed = height - a.created;
                (elapsed > 0 && elapsed.is_multiple_of(rule.cadence)).then(|| Event::ReminderSent {
                    lost: a.lost.clone(),
                    rescuer: a.rescuer.clone(),
                    recipients: vec![a.lost.clone(), rule.executor.clone()],
                    initiated: a.created,
                })
            })
            .collect();
        for event in due {
            self.ledger.deposit_event(event);
        }
    }
}
