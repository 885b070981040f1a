//! Scenario files: load, replay against a fresh runtime, compare traces.
//!
//! A scenario is a genesis balance list plus a timeline of steps. Each step
//! names the block it runs at, who signs it, the operation, and the outcome
//! it expects. Expectations are enforced: any step whose outcome differs
//! stops the run.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::DispatchError;
use crate::ledger::{amount, AccountId, Balance, BlockNumber, TraceEvent};
use crate::runtime::{Call, Constants, DispatchOutput, Origin, Runtime};

/// Scenarios shipped with the crate, as `(file name, contents)`.
pub const BUNDLED: &[(&str, &str)] = &[
    ("fig2_lifecycle.json", include_str!("../scenarios/fig2_lifecycle.json")),
    ("malicious_initiate.json", include_str!("../scenarios/malicious_initiate.json")),
    ("collusion_attack.json", include_str!("../scenarios/collusion_attack.json")),
    ("deadman_autopilot.json", include_str!("../scenarios/deadman_autopilot.json")),
    ("root_override.json", include_str!("../scenarios/root_override.json")),
    ("committed_friends.json", include_str!("../scenarios/committed_friends.json")),
];

pub fn bundled(name: &str) -> Option<&'static str> {
    BUNDLED
        .iter()
        .find(|(file, _)| *file == name || file.trim_end_matches(".json") == name)
        .map(|(_, text)| *text)
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LoadError {
    #[error("not valid JSON: {0}")]
    ParseError(String),
    #[error("scenario does not match the schema: {0}")]
    SchemaError(String),
    #[error("step {index} runs at block {at_block}, before the previous step")]
    UnsortedSteps { index: usize, at_block: BlockNumber },
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RunError {
    #[error("step {step}: expected {expected}, got {actual}")]
    ExpectationMismatch {
        step: usize,
        expected: String,
        actual: String,
    },
    #[error("step {step} is scheduled for block {at_block} but the clock is already at {height}")]
    ClockAhead {
        step: usize,
        at_block: BlockNumber,
        height: BlockNumber,
    },
    #[error("genesis: {0}")]
    Genesis(DispatchError),
}

/// What a step expects to happen.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(into = "String")]
pub enum Expect {
    Ok,
    Err(&'static str),
}

impl Expect {
    pub fn of(result: &Result<DispatchOutput, DispatchError>) -> Self {
        match result {
            Ok(_) => Expect::Ok,
            Err(e) => Expect::Err(e.id()),
        }
    }
}

impl fmt::Display for Expect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expect::Ok => f.write_str("Ok"),
            Expect::Err(id) => f.write_str(id),
        }
    }
}

impl TryFrom<String> for Expect {
    type Error = String;

    fn try_from(s: String) -> Result<Self, String> {
        if s == "Ok" {
            return Ok(Expect::Ok);
        }
        DispatchError::all_ids()
            .into_iter()
            .find(|id| *id == s)
            .map(Expect::Err)
            .ok_or_else(|| format!("unknown error identifier {s:?}"))
    }
}

impl<'de> Deserialize<'de> for Expect {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Expect::try_from(s).map_err(serde::de::Error::custom)
    }
}

impl From<Expect> for String {
    fn from(e: Expect) -> String {
        e.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenesisAccount {
    pub account: AccountId,
    #[serde(with = "amount")]
    pub balance: Balance,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawStep", into = "RawStep")]
pub struct Step {
    pub at_block: BlockNumber,
    pub actor: Origin,
    pub call: Call,
    pub expect: Expect,
}

/// On-disk step shape: `op` and `args` side by side with the other fields.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStep {
    at_block: BlockNumber,
    actor: Origin,
    op: String,
    #[serde(default = "empty_args")]
    args: Value,
    expect: Expect,
}

fn empty_args() -> Value {
    Value::Object(Default::default())
}

impl TryFrom<RawStep> for Step {
    type Error = String;

    fn try_from(raw: RawStep) -> Result<Self, String> {
        if !Call::NAMES.contains(&raw.op.as_str()) {
            return Err(format!("unknown op {:?}", raw.op));
        }
        let tagged = serde_json::json!({ "op": raw.op, "args": raw.args });
        let call = serde_json::from_value(tagged).map_err(|e| format!("{}: {e}", raw.op))?;
        Ok(Step {
            at_block: raw.at_block,
            actor: raw.actor,
            call,
            expect: raw.expect,
        })
    }
}

impl From<Step> for RawStep {
    fn from(step: Step) -> RawStep {
        let mut tagged = serde_json::to_value(&step.call).expect("calls serialize");
        let args = tagged
            .get_mut("args")
            .map(Value::take)
            .unwrap_or_else(empty_args);
        RawStep {
            at_block: step.at_block,
            actor: step.actor,
            op: step.call.name().to_string(),
            args,
            expect: step.expect,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub constants: Constants,
    pub genesis: Vec<GenesisAccount>,
    pub steps: Vec<Step>,
}

impl Scenario {
    /// Every operation name used, nested calls included.
    pub fn ops(&self) -> BTreeSet<&'static str> {
        self.steps
            .iter()
            .flat_map(|s| s.call.walk())
            .map(Call::name)
            .collect()
    }
}

pub fn load_scenario(text: &str) -> Result<Scenario, LoadError> {
    let doc: Value = serde_json::from_str(text).map_err(|e| LoadError::ParseError(e.to_string()))?;
    let scenario: Scenario =
        serde_json::from_value(doc).map_err(|e| LoadError::SchemaError(e.to_string()))?;

    let mut seen = BTreeSet::new();
    if let Some(dup) = scenario.genesis.iter().find(|g| !seen.insert(&g.account)) {
        return Err(LoadError::SchemaError(format!(
            "genesis lists {} twice",
            dup.account
        )));
    }
    if let Some(index) = (1..scenario.steps.len())
        .find(|&i| scenario.steps[i].at_block < scenario.steps[i - 1].at_block)
    {
        return Err(LoadError::UnsortedSteps {
            index,
            at_block: scenario.steps[index].at_block,
        });
    }
    Ok(scenario)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepOutcome {
    pub index: usize,
    pub at_block: BlockNumber,
    pub result: Result<DispatchOutput, DispatchError>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trace: Vec<TraceEvent>,
    pub state: Value,
    pub outcomes: Vec<StepOutcome>,
    pub runtime: Runtime,
}

impl RunOutput {
    pub fn trace_json(&self) -> String {
        crate::ledger::trace_to_json_lines(&self.trace)
    }
}

pub fn genesis_runtime(scenario: &Scenario) -> Result<Runtime, RunError> {
    let mut rt = Runtime::new(scenario.constants);
    for g in &scenario.genesis {
        rt.create_account(g.account.clone(), g.balance)
            .map_err(RunError::Genesis)?;
    }
    Ok(rt)
}

/// Replays `scenario` on a fresh runtime.
pub fn run(scenario: &Scenario) -> Result<RunOutput, RunError> {
    run_with(scenario, genesis_runtime(scenario)?)
}

pub(crate) fn run_with(scenario: &Scenario, mut rt: Runtime) -> Result<RunOutput, RunError> {
    let mut outcomes = Vec::with_capacity(scenario.steps.len());
    for (index, step) in scenario.steps.iter().enumerate() {
        let height = rt.height();
        if step.at_block < height {
            return Err(RunError::ClockAhead {
                step: index,
                at_block: step.at_block,
                height,
            });
        }
        rt.advance_blocks(step.at_block - height);
        let result = rt.dispatch(step.actor.clone(), step.call.clone());
        let actual = Expect::of(&result);
        if actual != step.expect {
            return Err(RunError::ExpectationMismatch {
                step: index,
                expected: step.expect.to_string(),
                actual: actual.to_string(),
            });
        }
        outcomes.push(StepOutcome {
            index,
            at_block: step.at_block,
            result,
        });
    }
    Ok(RunOutput {
        trace: rt.trace().to_vec(),
        state: rt.state_dump(),
        outcomes,
        runtime: rt,
    })
}

/// One line where two serialized traces disagree. `None` means that trace
/// had already ended.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Divergence {
    pub index: usize,
    pub left: Option<String>,
    pub right: Option<String>,
}

/// Every differing line, in order, so the first entry is the first
/// divergence. Empty iff the serialized traces are byte-identical.
pub fn diff_traces(a: &[TraceEvent], b: &[TraceEvent]) -> Vec<Divergence> {
    (0..a.len().max(b.len()))
        .filter_map(|index| {
            let left = a.get(index).map(TraceEvent::to_json);
            let right = b.get(index).map(TraceEvent::to_json);
            (left != right).then_some(Divergence { index, left, right })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ledger::acc;

    fn load(name: &str) -> Scenario {
        load_scenario(bundled(name).unwrap()).unwrap()
    }

    #[test]
    fn fig2_has_twelve_steps() {
        assert_eq!(load("fig2_lifecycle").steps.len(), 12);
    }

    #[test]
    fn every_bundled_scenario_runs() {
        for (name, text) in BUNDLED {
            let s = load_scenario(text).unwrap_or_else(|e| panic!("{name}: {e}"));
            run(&s).unwrap_or_else(|e| panic!("{name}: {e}"));
        }
    }

    #[test]
    fn bundled_scenarios_cover_every_op() {
        let used: BTreeSet<&str> = BUNDLED
            .iter()
            .flat_map(|(_, text)| load_scenario(text).unwrap().ops())
            .collect();
        let missing: Vec<&&str> = Call::NAMES.iter().filter(|n| !used.contains(**n)).collect();
        assert!(missing.is_empty(), "{missing:?}");
    }

    #[test]
    fn fig2_final_balances() {
        let out = run(&load("fig2_lifecycle")).unwrap();
        let rt = &out.runtime;
        for (who, bal) in [("B1", 505), ("B2", 505), ("E", 90), ("T", 0)] {
            assert_eq!(rt.free(&acc(who)), bal, "{who}");
        }
        assert_eq!(rt.reserved(&acc("T")), 0);
        assert_eq!(rt.total_issuance(), 1100);
        assert_eq!(out.trace.last().unwrap().event.kind(), "SweepCompleted");
    }

    #[test]
    fn replay_is_deterministic() {
        for (_, text) in BUNDLED {
            let s = load_scenario(text).unwrap();
            let (a, b) = (run(&s).unwrap(), run(&s).unwrap());
            assert!(diff_traces(&a.trace, &b.trace).is_empty());
            assert_eq!(a.trace_json(), b.trace_json());
        }
    }

    #[test]
    fn constant_override_diverges_at_first_deposit() {
        let base = load("fig2_lifecycle");
        let mut tweaked = base.clone();
        tweaked.constants.config_deposit_base = 11;
        let (a, b) = (run(&base).unwrap(), run(&tweaked));
        // the richer deposit changes balances but every step still succeeds
        let b = b.unwrap();
        let diffs = diff_traces(&a.trace, &b.trace);
        assert!(!diffs.is_empty());
        let first = &a.trace[diffs[0].index];
        assert_eq!(first.event.kind(), "Reserved");
        assert!(a.trace[..diffs[0].index]
            .iter()
            .all(|e| e.event.kind() != "Reserved"));
    }

    #[test]
    fn empty_traces_do_not_differ() {
        assert!(diff_traces(&[], &[]).is_empty());
    }

    #[test]
    fn load_errors() {
        assert!(matches!(load_scenario("{"), Err(LoadError::ParseError(_))));
        let doc = |steps: &str| {
            format!(r#"{{"name":"x","genesis":[{{"account":"T","balance":5}}],"steps":[{steps}]}}"#)
        };
        let step = |b: u64, op: &str, expect: &str| {
            format!(r#"{{"at_block":{b},"actor":"T","op":"{op}","args":{{}},"expect":"{expect}"}}"#)
        };
        let unsorted = doc(&format!(
            "{},{}",
            step(5, "total_issuance", "Ok"),
            step(4, "total_issuance", "Ok")
        ));
        assert_eq!(
            load_scenario(&unsorted),
            Err(LoadError::UnsortedSteps { index: 1, at_block: 4 })
        );
        let unknown_op = doc(&step(0, "teleport", "Ok"));
        assert!(matches!(load_scenario(&unknown_op), Err(LoadError::SchemaError(m)) if m.contains("teleport")));
        let unknown_err = doc(&step(0, "total_issuance", "Oops"));
        assert!(matches!(load_scenario(&unknown_err), Err(LoadError::SchemaError(_))));
        let bad_args = doc(r#"{"at_block":0,"actor":"T","op":"transfer","args":{"to":"E"},"expect":"Ok"}"#);
        assert!(matches!(load_scenario(&bad_args), Err(LoadError::SchemaError(_))));
        let dup = r#"{"name":"x","genesis":[{"account":"T","balance":5},{"account":"T","balance":1}],"steps":[]}"#;
        assert!(matches!(load_scenario(dup), Err(LoadError::SchemaError(_))));
    }

    #[test]
    fn mismatch_stops_the_run() {
        let mut s = load("fig2_lifecycle");
        s.steps[9].expect = Expect::Err("Threshold");
        assert_eq!(
            run(&s).unwrap_err(),
            RunError::ExpectationMismatch {
                step: 9,
                expected: "Threshold".into(),
                actual: "Ok".into()
            }
        );
    }

    #[test]
    fn clock_cannot_run_backwards() {
        let text = r#"{"name":"x","genesis":[{"account":"T","balance":5}],"steps":[
            {"at_block":0,"actor":"T","op":"advance_blocks","args":{"n":10},"expect":"Ok"},
            {"at_block":5,"actor":"T","op":"total_issuance","expect":"Ok"}]}"#;
        let s = load_scenario(text).unwrap();
        assert_eq!(
            run(&s).unwrap_err(),
            RunError::ClockAhead { step: 1, at_block: 5, height: 10 }
        );
    }

    #[test]
    fn steps_round_trip_through_json() {
        for (_, text) in BUNDLED {
            let s = load_scenario(text).unwrap();
            let again = load_scenario(&serde_json::to_string(&s).unwrap()).unwrap();
            assert_eq!(s, again);
        }
    }
}
