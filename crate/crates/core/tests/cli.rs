//! Exit codes and file outputs of the `mhres` binary.

use std::path::Path;
use std::process::{Command, Output};

use mhres::model::Solution;

const SIZE: &str = "custom:stages=2,branching=2,scenarios=2,periods=4,pv=1,bess=1,elastic=1,deferrable=1";

fn mhres(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mhres")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn text(out: &Output) -> String {
    format!("{}{}", String::from_utf8_lossy(&out.stdout), String::from_utf8_lossy(&out.stderr))
}

fn generate(dir: &Path) -> String {
    let path = dir.join("inst.json");
    let out = mhres(&["generate", "--size", SIZE, "--seed", "5", "--out", path.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", text(&out));
    path.to_str().unwrap().to_owned()
}

#[test]
fn solve_then_audit_passes_and_a_broken_start_fails() {
    let dir = tempfile::tempdir().unwrap();
    let inst = generate(dir.path());
    let sol = dir.path().join("sol.json");
    let out = mhres(&["solve", "--instance", &inst, "--variant", "rn", "--out", sol.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", text(&out));

    let out = mhres(&["audit", "--instance", &inst, "--solution", sol.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", text(&out));

    let mut broken = Solution::load(&sol).unwrap();
    for scenario in &mut broken.nodes[0].delta[0] {
        scenario.iter_mut().for_each(|d| *d = 0.0);
    }
    let bad = dir.path().join("bad.json");
    broken.save(&bad).unwrap();
    let out = mhres(&["audit", "--instance", &inst, "--solution", bad.to_str().unwrap()]);
    assert_eq!(code(&out), 1, "{}", text(&out));
    assert!(text(&out).contains("deferrable_start"), "{}", text(&out));
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let inst = generate(dir.path());
    assert_eq!(code(&mhres(&["frobnicate"])), 2);
    assert_eq!(code(&mhres(&["solve", "--instance", "/nonexistent/inst.json"])), 2);
    assert_eq!(code(&mhres(&["generate", "--size", "enormous", "--out", "x.json"])), 2);
    assert_eq!(code(&mhres(&["bound", "--instance", &inst, "--variant", "sd", "--scheme", "mhev"])), 2);
    assert_eq!(code(&mhres(&["bound", "--instance", &inst, "--scheme", "smg"])), 2);
}

#[test]
fn lp_export_writes_a_file_without_solving() {
    let dir = tempfile::tempdir().unwrap();
    let inst = generate(dir.path());
    let lp = dir.path().join("model.lp");
    let out = mhres(&["solve", "--instance", &inst, "--variant", "sd", "--lp", lp.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", text(&out));
    let body = std::fs::read_to_string(&lp).unwrap();
    assert!(body.trim_end().ends_with("End"));
}

#[test]
fn failed_experiment_runs_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("exp.json");
    std::fs::write(
        &config,
        r#"{"name":"broken","instances":[{"path":"missing.json"}],"variants":["nod"],"methods":[{"method":"monolithic"}]}"#,
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = mhres(&["experiment", "--config", config.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert_eq!(code(&out), 3, "{}", text(&out));
    assert!(out_dir.join("results.csv").exists());

    let out = mhres(&["report", "--results", out_dir.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", text(&out));
}

#[test]
fn bound_and_vsd_write_json_reports() {
    let dir = tempfile::tempdir().unwrap();
    let inst = generate(dir.path());
    let sol = dir.path().join("sol.json");
    assert_eq!(code(&mhres(&["solve", "--instance", &inst, "--method", "srh", "--out", sol.to_str().unwrap()])), 0);
    let bound = dir.path().join("bound.json");
    let out = mhres(&["bound", "--instance", &inst, "--scheme", "sws", "--out", bound.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", text(&out));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&bound).unwrap()).unwrap();
    assert!(report.get("timings").is_none() || report["timings"].is_null());
    let vsd = dir.path().join("vsd.json");
    let out = mhres(&["vsd", "--instance", &inst, "--feasible", sol.to_str().unwrap(), "--out", vsd.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", text(&out));
    assert!(vsd.exists());
}
