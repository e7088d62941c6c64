//! Scenario files, trace output and batch runs behind the `owgp` binary.

mod run;
mod scenario;
mod trace;

pub use run::{batch_exit_code, exit_code, run_batch, run_seed, summary_table, SeedReport};
pub use scenario::{
    load_rules, load_scenario, BeliefSpec, NoiseSpec, ObjectSpec, RegionSpec, RunInputs, Scenario, ScenarioError,
    WeightPrior,
};
pub use trace::{emit_trace, trace_to_string, write_trace};
