//! `inherit`: run scenarios, run the invariant suites, narrate a scenario.

mod explain;
mod render;

use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};

use inherit_core::check;
use inherit_core::sim::{self, LoadError, RunError, Scenario};

/// Exit status when a step's outcome differs from its expectation.
const EXIT_MISMATCH: u8 = 1;
/// Exit status when the scenario cannot be read, parsed or started.
const EXIT_LOAD: u8 = 2;

#[derive(Parser)]
#[command(name = "inherit", version, about = "Digital-inheritance protocol engine")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Replay a scenario and print its event trace.
    ///
    /// Time is counted in blocks. Delay and liveness periods in scenario
    /// files are block counts; at six seconds per block a day is 14400
    /// blocks.
    Run {
        /// Scenario file, or the name of a bundled scenario.
        path: String,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
        /// Print the final state as JSON after the trace.
        #[arg(long)]
        dump_state: bool,
    },
    /// Run invariant suites and print a pass/fail table.
    Check {
        /// Suites to run: conservation, threshold, sbt_nontransfer, deadman, commitment.
        suites: Vec<String>,
        /// Run every suite.
        #[arg(long)]
        all: bool,
        /// Seed for the randomized suites.
        #[arg(long, env = check::SEED_VAR, default_value_t = 0)]
        seed: u64,
    },
    /// Narrate a scenario step by step using plan roles.
    Explain {
        /// Scenario file, or the name of a bundled scenario.
        path: String,
    },
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run {
            path,
            format,
            dump_state,
        } => cmd_run(&path, format, dump_state),
        Command::Check { suites, all, seed } => cmd_check(&suites, all, seed),
        Command::Explain { path } => cmd_explain(&path),
    }
}

fn read_scenario(path: &str) -> Result<Scenario, String> {
    let text = match fs::read_to_string(path) {
        Ok(text) => text,
        Err(e) => match sim::bundled(path) {
            Some(text) if !Path::new(path).exists() => text.to_string(),
            _ => return Err(format!("{path}: {e}")),
        },
    };
    sim::load_scenario(&text).map_err(|e: LoadError| format!("{path}: {e}"))
}

fn describe_failure(scenario: &Scenario, err: &RunError) -> (u8, String) {
    match err {
        RunError::ExpectationMismatch { step, .. } => {
            let s = &scenario.steps[*step];
            let at = format!("{} by {} at block {}", s.call.name(), s.actor, s.at_block);
            (EXIT_MISMATCH, format!("{err} ({at})"))
        }
        RunError::ClockAhead { .. } | RunError::Genesis(_) => (EXIT_LOAD, err.to_string()),
    }
}

fn cmd_run(path: &str, format: Format, dump_state: bool) -> ExitCode {
    let scenario = match read_scenario(path) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_LOAD);
        }
    };
    let out = match sim::run(&scenario) {
        Ok(out) => out,
        Err(err) => {
            let (code, msg) = describe_failure(&scenario, &err);
            eprintln!("{}: {msg}", scenario.name);
            return ExitCode::from(code);
        }
    };
    match format {
        Format::Json => print!("{}", out.trace_json()),
        Format::Text => {
            for line in render::trace_text(&out.trace) {
                println!("{line}");
            }
            println!(
                "{}: {} steps as expected, {} events, height {}",
                scenario.name,
                scenario.steps.len(),
                out.trace.len(),
                out.runtime.height()
            );
        }
    }
    if dump_state {
        println!(
            "{}",
            serde_json::to_string_pretty(&out.state).expect("state dump serializes")
        );
    }
    ExitCode::SUCCESS
}

fn cmd_check(requested: &[String], all: bool, seed: u64) -> ExitCode {
    let selected: Vec<&str> = if all {
        check::SUITES.to_vec()
    } else {
        requested.iter().map(String::as_str).collect()
    };
    if let Some(bad) = selected.iter().find(|s| !check::SUITES.contains(s)) {
        eprintln!(
            "error: unknown suite {bad:?}; known suites: {}",
            check::SUITES.join(", ")
        );
        return ExitCode::from(EXIT_LOAD);
    }
    if selected.is_empty() {
        println!("0 suites selected, nothing to run");
        return ExitCode::SUCCESS;
    }

    println!("{:<16} {:<6} {:>7} {:>9}", "suite", "result", "checks", "time");
    let mut failed = 0;
    for name in &selected {
        let start = Instant::now();
        let report = check::run_suite(name, seed).expect("names validated above");
        let took = start.elapsed();
        let verdict = if report.passed() { "pass" } else { "FAIL" };
        println!(
            "{:<16} {:<6} {:>7} {:>7}ms",
            report.name,
            verdict,
            report.cases,
            took.as_millis()
        );
        for f in &report.failures {
            println!("    {f}");
        }
        failed += usize::from(!report.passed());
    }
    println!(
        "{} suites passed, {} failed (seed {seed})",
        selected.len() - failed,
        failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn cmd_explain(path: &str) -> ExitCode {
    let scenario = match read_scenario(path) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_LOAD);
        }
    };
    let outcomes = match sim::run(&scenario) {
        Ok(out) => out
            .outcomes
            .into_iter()
            .map(|o| o.result)
            .collect::<Vec<_>>(),
        Err(err) => {
            let (code, msg) = describe_failure(&scenario, &err);
            eprintln!("{}: {msg}", scenario.name);
            return ExitCode::from(code);
        }
    };
    for line in explain::narrate(&scenario, &outcomes) {
        println!("{line}");
    }
    ExitCode::SUCCESS
}
