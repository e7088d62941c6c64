mod common;

use std::process::Command;

use owgp::cli::{emit_trace, run_seed, trace_to_string, Scenario, ScenarioError};
use owgp::executive::{RecordKind, Status};

const BUNDLED: [&str; 5] = ["illustrative.scn", "sim-green.scn", "sim-heavy.scn", "sim-openworld.scn", "oil-bottles.scn"];

fn owgp() -> Command {
    Command::new(env!("CARGO_BIN_EXE_owgp"))
}

#[test]
fn bundled_scenarios_round_trip_through_toml() {
    for name in BUNDLED {
        let s = common::scenario(name);
        let again = Scenario::from_toml(&s.to_toml()).unwrap();
        assert_eq!(s, again, "{name}");
    }
}

#[test]
fn out_of_range_probability_names_its_field() {
    let text = std::fs::read_to_string(common::scenario_path("illustrative.scn")).unwrap();
    let broken = text.replace("exists_prior = 0.1", "exists_prior = 1.5");
    match Scenario::from_toml(&broken) {
        Err(e @ ScenarioError::Invalid { .. }) => assert!(e.to_string().contains("regions[1].exists_prior"), "{e}"),
        other => panic!("expected a validation error, got {other:?}"),
    }
}

#[test]
fn unknown_fields_are_rejected() {
    let text = std::fs::read_to_string(common::scenario_path("sim-green.scn")).unwrap();
    assert!(Scenario::from_toml(&format!("colour = \"teal\"\n{text}")).is_err());
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let out = owgp().arg("--frobnicate").output().unwrap();
    assert_eq!(out.status.code(), Some(64));
}

#[test]
fn missing_scenario_is_a_load_error() {
    let out = owgp().args(["--scenario", "/nonexistent/x.scn", "--seed", "0"]).output().unwrap();
    assert_eq!(out.status.code(), Some(66));
}

#[test]
fn cli_run_writes_a_trace_ending_on_the_desk() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("run.jsonl");
    let out = owgp()
        .arg("--scenario")
        .arg(common::scenario_path("illustrative.scn"))
        .args(["--seed", "7", "--trace"])
        .arg(&trace)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let records: Vec<serde_json::Value> = std::fs::read_to_string(&trace)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    let last_action = records.iter().rev().find(|r| r["kind"] == "action").unwrap();
    assert_eq!(last_action["payload"]["op"], "Place");
    assert_eq!(last_action["payload"]["region"], "desk");
    assert_eq!(records.last().unwrap()["kind"], "done");
}

#[test]
fn batch_summary_reports_the_success_rate() {
    let out = owgp()
        .arg("--scenario")
        .arg(common::scenario_path("sim-green.scn"))
        .args(["--seeds", "0..3", "--summary"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("success 3/3"));
}

#[test]
fn same_seed_gives_byte_identical_traces() {
    let dir = tempfile::tempdir().unwrap();
    for name in BUNDLED {
        let s = common::scenario(name);
        let a = run_seed(&s, 3).unwrap();
        let b = run_seed(&s, 3).unwrap();
        let (pa, pb) = (dir.path().join("a.jsonl"), dir.path().join("b.jsonl"));
        emit_trace(&a.trace, &pa).unwrap();
        emit_trace(&b.trace, &pb).unwrap();
        assert_eq!(std::fs::read(&pa).unwrap(), std::fs::read(&pb).unwrap(), "{name}");
        assert_eq!(trace_to_string(&a.trace), trace_to_string(&b.trace));
    }
}

#[test]
fn successful_runs_leave_a_satisfying_object_in_the_world() {
    let s = common::scenario("illustrative.scn");
    let rel = s.relations();
    let desk = s.regions.iter().find(|r| r.name == "desk").unwrap();
    let mut successes = 0;
    for seed in 0..20 {
        let mut inputs = s.inputs(seed).unwrap();
        let out = owgp::executive::run(inputs.belief, &inputs.goal, &mut inputs.world, &inputs.config, seed);
        if out.status != Status::Success {
            continue;
        }
        successes += 1;
        let w = &inputs.world;
        let ok = w.objects.iter().enumerate().any(|(i, o)| {
            w.held != Some(i)
                && o.true_type == "can"
                && rel.colors["green"].contains(o.hsv)
                && o.grams >= 400.0
                && (desk.min[0]..=desk.max[0]).contains(&o.pose[0])
                && (desk.min[1]..=desk.max[1]).contains(&o.pose[1])
        });
        assert!(ok, "seed {seed} reported success without a heavy green can on the desk");
        assert!(out.trace.of_kind(RecordKind::Done).count() == 1);
    }
    assert!(successes >= 18, "{successes}/20");
}
