//! Soulbound-token registry.
//!
//! Tokens are role credentials issued by a testator to the people named in an
//! inheritance plan. Owner and issuer are fixed at mint; only the issuer may
//! change attributes; transfer always fails.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{error_ids, DispatchError};
use crate::inheritance::{InheritanceError, InheritancePlan};
use crate::ledger::{AccountId, BlockNumber, Event};
use crate::recovery::FriendRef;
use crate::runtime::Runtime;

pub type TokenId = u64;

error_ids! {
    pub enum SbtError {
        UnknownToken => "token does not exist",
        NotIssuer => "only the issuer may change token attributes",
        NonTransferable => "soulbound tokens cannot be transferred",
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Role {
    Testator,
    Executor,
    Guardian,
    Beneficiary,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SoulboundToken {
    pub token_id: TokenId,
    pub issuer: AccountId,
    pub owner: AccountId,
    pub role: Role,
    pub attributes: BTreeMap<String, String>,
    pub minted_at: BlockNumber,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct SbtRegistry {
    tokens: BTreeMap<TokenId, SoulboundToken>,
}

impl SbtRegistry {
    pub fn get(&self, id: TokenId) -> Option<&SoulboundToken> {
        self.tokens.get(&id)
    }

    pub fn tokens(&self) -> impl Iterator<Item = &SoulboundToken> {
        self.tokens.values()
    }

    fn next_id(&self) -> TokenId {
        self.tokens.keys().next_back().map_or(1, |max| max + 1)
    }

    /// True iff `owner` holds a token of `role` issued by `issuer`.
    pub fn holds(&self, owner: &AccountId, role: Role, issuer: &AccountId) -> bool {
        self.tokens
            .values()
            .any(|t| &t.owner == owner && t.role == role && &t.issuer == issuer)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MissingCredential {
    pub account: AccountId,
    pub role: Role,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ExistenceReport {
    pub complete: bool,
    pub missing: Vec<MissingCredential>,
}

/// Entities a plan asks to be credentialed, in plan order. Committed
/// guardians are skipped: their identities are not known on chain.
pub fn required_credentials(plan: &InheritancePlan) -> Vec<(AccountId, Role)> {
    let mut out = vec![(plan.executor.clone(), Role::Executor)];
    out.extend(plan.guardians.iter().filter_map(|g| match g {
        FriendRef::Plain(id) => Some((id.clone(), Role::Guardian)),
        FriendRef::Committed { .. } => None,
    }));
    out.extend(
        plan.beneficiaries
            .iter()
            .map(|b| (b.account.clone(), Role::Beneficiary)),
    );
    out
}

impl Runtime {
    pub fn sbts(&self) -> &SbtRegistry {
        &self.m.sbts
    }

    pub fn mint_sbt(
        &mut self,
        issuer: &AccountId,
        owner: &AccountId,
        role: Role,
    ) -> Result<SoulboundToken, DispatchError> {
        self.ledger.ensure_exists(issuer)?;
        self.ledger.ensure_exists(owner)?;
        let token = SoulboundToken {
            token_id: self.m.sbts.next_id(),
            issuer: issuer.clone(),
            owner: owner.clone(),
            role,
            attributes: BTreeMap::new(),
            minted_at: self.height(),
        };
        self.m.sbts.tokens.insert(token.token_id, token.clone());
        self.ledger.deposit_event(Event::SbtMinted {
            token_id: token.token_id,
            issuer: issuer.clone(),
            owner: owner.clone(),
            role,
        });
        Ok(token)
    }

    /// Always fails. Exists so the refusal is observable.
    pub fn sbt_transfer(
        &mut self,
        _token_id: TokenId,
        _from: &AccountId,
        _to: &AccountId,
    ) -> Result<(), DispatchError> {
        Err(SbtError::NonTransferable.into())
    }

    pub fn set_attribute(
        &mut self,
        issuer: &AccountId,
        token_id: TokenId,
        key: String,
        value: String,
    ) -> Result<SoulboundToken, DispatchError> {
        let token = self
            .m
            .sbts
            .tokens
            .get_mut(&token_id)
            .ok_or(SbtError::UnknownToken)?;
        if &token.issuer != issuer {
            return Err(SbtError::NotIssuer.into());
        }
        token.attributes.insert(key.clone(), value.clone());
        let token = token.clone();
        self.ledger.deposit_event(Event::SbtAttributeSet {
            token_id,
            key,
            value,
        });
        Ok(token)
    }

    /// Checks that every executor, plain guardian and beneficiary in `plan`
    /// holds a matching credential issued by the plan's testator.
    pub fn verify_existence(&self, plan: &InheritancePlan) -> ExistenceReport {
        let missing: Vec<MissingCredential> = required_credentials(plan)
            .into_iter()
            .filter(|(who, role)| !self.m.sbts.holds(who, *role, &plan.testator))
            .map(|(account, role)| MissingCredential { account, role })
            .collect();
        ExistenceReport {
            complete: missing.is_empty(),
            missing,
        }
    }

    pub fn verify_plan_existence(
        &self,
        testator: &AccountId,
    ) -> Result<ExistenceReport, DispatchError> {
        let plan = self.m.plans.get(testator).ok_or(InheritanceError::NoPlan)?;
        Ok(self.verify_existence(plan))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ledger::acc;

    fn registry() -> Runtime {
        let mut rt = Runtime::default();
        for who in ["T", "F1", "F2", "X"] {
            rt.create_account(acc(who), 0).unwrap();
        }
        rt
    }

    #[test]
    fn mint_assigns_sequential_ids() {
        let mut rt = registry();
        let t1 = rt.mint_sbt(&acc("T"), &acc("F1"), Role::Guardian).unwrap();
        assert_eq!((t1.token_id, t1.owner.clone()), (1, acc("F1")));
        let t2 = rt.mint_sbt(&acc("T"), &acc("F2"), Role::Guardian).unwrap();
        assert_eq!(t2.token_id, 2);
        assert_eq!(
            rt.mint_sbt(&acc("T"), &acc("Q"), Role::Guardian),
            Err(crate::ledger::LedgerError::UnknownAccount.into())
        );
    }

    #[test]
    fn transfer_always_refused() {
        let mut rt = registry();
        rt.mint_sbt(&acc("T"), &acc("F1"), Role::Guardian).unwrap();
        let events = rt.trace().len();
        for (id, from, to) in [(1, "F1", "F2"), (1, "F1", "F1"), (99, "F1", "F2")] {
            assert_eq!(
                rt.sbt_transfer(id, &acc(from), &acc(to)),
                Err(SbtError::NonTransferable.into())
            );
        }
        assert_eq!(rt.trace().len(), events);
        assert_eq!(rt.sbts().get(1).unwrap().owner, acc("F1"));
    }

    #[test]
    fn attributes_are_issuer_gated() {
        let mut rt = registry();
        rt.mint_sbt(&acc("T"), &acc("F1"), Role::Guardian).unwrap();
        let tok = rt
            .set_attribute(&acc("T"), 1, "level".into(), "2".into())
            .unwrap();
        assert_eq!(tok.attributes.get("level").map(String::as_str), Some("2"));
        assert_eq!(
            rt.set_attribute(&acc("F2"), 1, "level".into(), "9".into()),
            Err(SbtError::NotIssuer.into())
        );
        let tok = rt
            .set_attribute(&acc("T"), 1, "level".into(), "3".into())
            .unwrap();
        assert_eq!(tok.attributes.len(), 1);
        assert_eq!(tok.attributes["level"], "3");
        assert_eq!(
            rt.set_attribute(&acc("T"), 7, "k".into(), "v".into()),
            Err(SbtError::UnknownToken.into())
        );
    }
}
