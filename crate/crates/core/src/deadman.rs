//! Deadman's switch.
//!
//! An owner arms a switch with a liveness period and a grace period and then
//! checks in periodically. The block hook alerts once the liveness period has
//! fully elapsed without a check-in (strictly greater than), and fires once the
//! grace period has elapsed as well. Firing is final. A switch armed with
//! `AutoInitiate(rescuer)` opens a recovery against the owner when it fires,
//! so vouching and the delay period still stand between the rescuer and the
//! estate.

use serde::{Deserialize, Serialize};

use crate::error::{error_ids, DispatchError};
use crate::ledger::{AccountId, BlockNumber, Event};
use crate::runtime::Runtime;

error_ids! {
    pub enum DeadmanError {
        AlreadyArmed => "owner already has a live switch",
        ZeroPeriod => "liveness period must be at least one block",
        NotArmed => "switch is not armed",
        UnknownSwitch => "owner has no switch",
        AlreadyFired => "switch has already fired",
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SwitchState {
    Armed,
    Alerted,
    Fired,
    Disarmed,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeadmanAction {
    #[default]
    None,
    AutoInitiate(AccountId),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DeadmanSwitch {
    pub owner: AccountId,
    pub liveness_period: BlockNumber,
    pub grace_period: BlockNumber,
    pub last_checkin: BlockNumber,
    pub action: DeadmanAction,
    pub state: SwitchState,
}

impl DeadmanSwitch {
    /// First block at which the hook raises an alert.
    pub fn alert_block(&self) -> BlockNumber {
        self.last_checkin
            .saturating_add(self.liveness_period)
            .saturating_add(1)
    }

    /// First block at which the hook fires.
    pub fn fire_block(&self) -> BlockNumber {
        self.alert_block().saturating_add(self.grace_period)
    }
}

impl Runtime {
    pub fn switch(&self, owner: &AccountId) -> Option<&DeadmanSwitch> {
        self.m.switches.get(owner)
    }

    pub fn arm_switch(
        &mut self,
        owner: &AccountId,
        liveness_period: BlockNumber,
        grace_period: BlockNumber,
        action: DeadmanAction,
    ) -> Result<DeadmanSwitch, DispatchError> {
        self.ledger.ensure_exists(owner)?;
        if liveness_period == 0 {
            return Err(DeadmanError::ZeroPeriod.into());
        }
        if matches!(self.m.switches.get(owner), Some(s) if s.state != SwitchState::Disarmed) {
            return Err(DeadmanError::AlreadyArmed.into());
        }
        let switch = DeadmanSwitch {
            owner: owner.clone(),
            liveness_period,
            grace_period,
            last_checkin: self.height(),
            action,
            state: SwitchState::Armed,
        };
        self.m.switches.insert(owner.clone(), switch.clone());
        Ok(switch)
    }

    pub fn check_in(&mut self, owner: &AccountId) -> Result<DeadmanSwitch, DispatchError> {
        let height = self.height();
        let switch = self
            .m
            .switches
            .get_mut(owner)
            .filter(|s| matches!(s.state, SwitchState::Armed | SwitchState::Alerted))
            .ok_or(DeadmanError::NotArmed)?;
        switch.last_checkin = height;
        switch.state = SwitchState::Armed;
        Ok(switch.clone())
    }

    pub fn disarm(&mut self, owner: &AccountId) -> Result<DeadmanSwitch, DispatchError> {
        let switch = self
            .m
            .switches
            .get_mut(owner)
            .ok_or(DeadmanError::UnknownSwitch)?;
        match switch.state {
            SwitchState::Fired => Err(DeadmanError::AlreadyFired.into()),
            SwitchState::Disarmed => Err(DeadmanError::NotArmed.into()),
            SwitchState::Armed | SwitchState::Alerted => {
                switch.state = SwitchState::Disarmed;
                Ok(switch.clone())
            }
        }
    }

    /// Runs as each block opens.
    pub(crate) fn deadman_hook(&mut self) {
        let height = self.height();
        let owners: Vec<AccountId> = self
            .m
            .switches
            .iter()
            .filter(|(_, s)| matches!(s.state, SwitchState::Armed | SwitchState::Alerted))
            .map(|(o, _)| o.clone())
            .collect();

        for owner in owners {
            let switch = self.m.switches.get_mut(&owner).expect("collected above");
            let idle = height - switch.last_checkin;

            if switch.state == SwitchState::Armed && idle > switch.liveness_period {
                switch.state = SwitchState::Alerted;
                let last_checkin = switch.last_checkin;
                self.ledger.deposit_event(Event::DeadmanAlert {
                    owner: owner.clone(),
                    last_checkin,
                });
            }

            let switch = self.m.switches.get_mut(&owner).expect("collected above");
            let limit = switch.liveness_period.saturating_add(switch.grace_period);
            if switch.state == SwitchState::Alerted && idle > limit {
                switch.state = SwitchState::Fired;
                let action = switch.action.clone();
                let (initiated, failure) = match action {
                    DeadmanAction::None => (None, None),
                    DeadmanAction::AutoInitiate(rescuer) => {
                        match self.transactional(|rt| rt.initiate_recovery(&rescuer, &owner)) {
                            Ok(_) => (Some(rescuer), None),
                            Err(e) => (None, Some(e.id().to_string())),
                        }
                    }
                };
                self.ledger.deposit_event(Event::DeadmanFired {
                    owner,
                    initiated,
                    failure,
                });
            }
        }
    }
}
