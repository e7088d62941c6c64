//! Seeded runs and batch summaries.

use std::fmt::Write as _;
use std::time::Instant;

use crate::executive::{run, Outcome, Status};

use super::scenario::{Scenario, ScenarioError};

/// Process exit code for a run status.
pub fn exit_code(status: Status) -> i32 {
    match status {
        Status::Success => 0,
        Status::PlanningFailure => 2,
        Status::BudgetExhausted => 3,
    }
}

/// Exit code for a batch: the first failure kind wins, planning first.
pub fn batch_exit_code(statuses: impl IntoIterator<Item = Status>) -> i32 {
    let mut code = 0;
    for s in statuses {
        match s {
            Status::PlanningFailure => return 2,
            Status::BudgetExhausted => code = 3,
            Status::Success => {}
        }
    }
    code
}

pub fn run_seed(scenario: &Scenario, seed: u64) -> Result<Outcome, ScenarioError> {
    let mut inputs = scenario.inputs(seed)?;
    Ok(run(inputs.belief, &inputs.goal, &mut inputs.world, &inputs.config, seed))
}

#[derive(Clone, Debug)]
pub struct SeedReport {
    pub seed: u64,
    pub status: Status,
    pub primitives: usize,
    pub replans: usize,
    pub millis: u128,
}

pub fn run_batch(
    scenario: &Scenario,
    seeds: impl IntoIterator<Item = u64>,
    mut each: impl FnMut(u64, &Outcome),
) -> Result<Vec<SeedReport>, ScenarioError> {
    let mut out = Vec::new();
    for seed in seeds {
        let t = Instant::now();
        let o = run_seed(scenario, seed)?;
        each(seed, &o);
        out.push(SeedReport {
            seed,
            status: o.status,
            primitives: o.primitives,
            replans: o.replans,
            millis: t.elapsed().as_millis(),
        });
    }
    Ok(out)
}

/// Per-seed status table followed by the success rate.
pub fn summary_table(reports: &[SeedReport]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:>6}  {:<17} {:>10} {:>7} {:>8}", "seed", "status", "primitives", "replans", "ms");
    for r in reports {
        let status = serde_json::to_value(r.status).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default();
        let _ = writeln!(s, "{:>6}  {:<17} {:>10} {:>7} {:>8}", r.seed, status, r.primitives, r.replans, r.millis);
    }
    let ok = reports.iter().filter(|r| r.status == Status::Success).count();
    let pct = if reports.is_empty() { 0.0 } else { 100.0 * ok as f64 / reports.len() as f64 };
    let _ = writeln!(s, "success {ok}/{} ({pct:.1}%)", reports.len());
    s
}
