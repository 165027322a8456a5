use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::Command;

use rhplan::harness::{read_metrics, replay_trace_log, METRICS_HEADER};
use rhplan::scenario::load_scenario;

fn scenario_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}

fn rhplan(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_rhplan")).args(args).output().unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

#[test]
fn satisfiable_pair_exits_zero() {
    let path = scenario_path("pair.json");
    let (code, stdout, stderr) = rhplan(&["--scenario", path.to_str().unwrap(), "--mode", "both"]);
    assert_eq!(code, 0, "{stdout}{stderr}");
}

#[test]
fn unsatisfiable_task_exits_two() {
    let path = scenario_path("unsatisfiable.json");
    for mode in ["receding", "centralized", "both"] {
        let (code, stdout, stderr) = rhplan(&["--scenario", path.to_str().unwrap(), "--mode", mode]);
        assert_eq!(code, 2, "{mode}: {stdout}{stderr}");
    }
}

#[test]
fn oversized_team_exits_three() {
    let path = scenario_path("warehouse.json");
    let (code, stdout, stderr) = rhplan(&["--scenario", path.to_str().unwrap(), "--mode", "centralized"]);
    assert_eq!(code, 3, "{stdout}{stderr}");
    let pair = scenario_path("pair.json");
    let (code, _, _) = rhplan(&["--scenario", pair.to_str().unwrap(), "--mode", "centralized", "--cap", "1"]);
    assert_eq!(code, 3);
}

#[test]
fn usage_errors_exit_one() {
    let pair = scenario_path("pair.json");
    let pair = pair.to_str().unwrap();
    assert_eq!(rhplan(&[]).0, 1);
    assert_eq!(rhplan(&["--scenario", pair, "--mode", "sideways"]).0, 1);
    assert_eq!(rhplan(&["--scenario", "/nonexistent/scenario.json"]).0, 1);
    assert_eq!(rhplan(&["--scenario", pair, "--h", "0"]).0, 1);
    assert_eq!(rhplan(&["--scenario", pair, "--H", "9", "--max-H", "5"]).0, 1);
    assert_eq!(rhplan(&["--help"]).0, 0);
}

#[test]
fn metrics_and_trace_files_describe_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let metrics = dir.path().join("metrics.csv");
    let trace = dir.path().join("trace.log");
    let path = scenario_path("pair.json");
    let (code, stdout, stderr) = rhplan(&[
        "--scenario",
        path.to_str().unwrap(),
        "--iterations",
        "12",
        "--metrics",
        metrics.to_str().unwrap(),
        "--trace",
        trace.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{stdout}{stderr}");

    let text = std::fs::read_to_string(&metrics).unwrap();
    assert_eq!(text.lines().next(), Some(METRICS_HEADER));
    let rows = read_metrics(text.as_bytes()).unwrap();
    assert_eq!(rows.len(), 12);
    for (k, row) in rows.iter().enumerate() {
        assert_eq!(row.iteration, k + 1);
        let members: Vec<usize> =
            row.classes.split(';').flat_map(|c| c.split('+')).map(|a| a.parse().unwrap()).collect();
        let distinct: BTreeSet<usize> = members.iter().copied().collect();
        assert_eq!(members.len(), 2);
        assert_eq!(distinct, BTreeSet::from([1, 2]));
        let classes = row.classes.split(';').count();
        for col in [&row.q_a, &row.q_p, &row.h, &row.big_h, &row.plan_len] {
            assert_eq!(col.split(';').count(), classes);
        }
        let ordering: BTreeSet<&str> = row.ordering.split(' ').collect();
        assert_eq!(ordering, BTreeSet::from(["1", "2"]));
    }

    let s = load_scenario(&path).unwrap();
    let log = std::fs::read_to_string(&trace).unwrap();
    let replayed = replay_trace_log(&s, &log).unwrap();
    assert_eq!(replayed.traces.len(), 2);
    for t in &replayed.traces {
        assert_eq!(t.events.len(), 12);
    }
    assert_eq!(log.lines().count(), 2 * 13);
}
