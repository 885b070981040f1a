#![allow(dead_code)]

pub mod sha256;

use inherit_core::sim::{bundled, load_scenario, run, RunOutput, Scenario};
use inherit_core::AccountId;

pub fn acc(label: &str) -> AccountId {
    AccountId::new(label).unwrap()
}

pub fn scenario(name: &str) -> Scenario {
    load_scenario(bundled(name).unwrap()).unwrap()
}

pub fn run_bundled(name: &str) -> RunOutput {
    run(&scenario(name)).unwrap()
}

/// `(block, kind)` for every event in a run.
pub fn kinds(out: &RunOutput) -> Vec<(u64, &'static str)> {
    out.trace.iter().map(|e| (e.block, e.event.kind())).collect()
}
