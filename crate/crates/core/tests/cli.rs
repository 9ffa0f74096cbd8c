use std::path::Path;
use std::process::{Command, Output};

fn conewalk(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_conewalk")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn run_then_validate() {
    let dir = tempfile::tempdir().unwrap();
    let scen = dir.path().join("flat.jsonl");
    let trace = dir.path().join("trace.jsonl");
    std::fs::write(&scen, conewalk::sim::flat_walk(3, 0.2).to_jsonl()).unwrap();
    let o = conewalk(&["run", p(&scen), "-o", p(&trace), "-n", "10", "--eps", "1e-3", "--radius", "0.05", "--rate", "100", "--seed", "5"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let o = conewalk(&["validate", p(&trace), "--scenario", p(&scen)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
}

#[test]
fn declared_failure_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let scen = dir.path().join("stairs.jsonl");
    let params = conewalk::sim::StaircaseParams { steps: 10, tilt_range: 0.3, ..Default::default() };
    std::fs::write(&scen, conewalk::sim::generate_staircase(&params).to_jsonl()).unwrap();
    let o = conewalk(&["run", p(&scen), "--friction", "0.05", "-o", p(&dir.path().join("t.jsonl"))]);
    assert_eq!(code(&o), 2);
}

#[test]
fn input_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.jsonl");
    assert_eq!(code(&conewalk(&["run", p(&missing)])), 3);
    let garbage = dir.path().join("garbage.jsonl");
    std::fs::write(&garbage, "not json\n").unwrap();
    assert_eq!(code(&conewalk(&["run", p(&garbage)])), 3);
    assert_eq!(code(&conewalk(&["validate", p(&garbage)])), 3);
    let scen = dir.path().join("flat.jsonl");
    std::fs::write(&scen, conewalk::sim::flat_walk(2, 0.2).to_jsonl()).unwrap();
    assert_eq!(code(&conewalk(&["run", p(&scen), "--radius", "-1"])), 3);
    assert_eq!(code(&conewalk(&["regions", p(&scen), "--feet", "9"])), 3);
    assert_eq!(code(&conewalk(&["run", p(&scen), "--no-such-flag"])), 3);
    assert_eq!(code(&conewalk(&["--help"])), 0);
}

#[test]
fn tampered_trace_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.jsonl");
    let t = conewalk::sim::run_simulation(&conewalk::sim::flat_walk(2, 0.2), &Default::default());
    let text = t.to_jsonl().replace("\"force_lp_status\":\"feasible\"", "\"force_lp_status\":\"infeasible\"");
    std::fs::write(&trace, text).unwrap();
    assert_eq!(code(&conewalk(&["validate", p(&trace)])), 2);
}

#[test]
fn gen_staircase_and_regions() {
    let dir = tempfile::tempdir().unwrap();
    let scen = dir.path().join("stairs.jsonl");
    let o = conewalk(&["gen-staircase", "--seed", "1", "--steps", "10", "--tilt", "0.3", "-o", p(&scen)]);
    assert_eq!(code(&o), 0);
    let s = conewalk::sim::load_scenario(&scen).unwrap();
    assert_eq!(s.footsteps.len(), 10);
    let o = conewalk(&["regions", p(&scen), "--feet", "0,1"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["static_polygon"]["area"].as_f64().unwrap() > 0.0);
    assert_eq!(v["accel_cone"]["rest_inside"], true);
}

#[test]
fn bench_writes_jsonl() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bench.jsonl");
    let o = conewalk(&["bench", "--seed", "3", "--stances", "3", "--reps", "1", "-o", p(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    for line in text.lines() {
        serde_json::from_str::<serde_json::Value>(line).unwrap();
    }
    assert!(text.contains("\"summary\""));
}
