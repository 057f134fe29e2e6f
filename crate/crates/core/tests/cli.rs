use std::path::Path;
use std::process::Command;

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lifebranch"))
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

const EXP_BASE: &str = r#"{
  "alpha": {"kind": "constant", "value": 2.0},
  "offspring": {"kind": "deterministic", "n": 1},
  "lifetime": {"kind": "exponential", "rate": 1.0},
  "f": {"kind": "one"}
}"#;

const SUBCRITICAL: &str = r#"{
  "alpha": {"kind": "constant", "value": 1.0},
  "offspring": {"kind": "geometric", "mean": 0.4},
  "lifetime": {"kind": "exponential", "rate": 1.0},
  "f": {"kind": "one"}
}"#;

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn validate_reports_mean_offspring() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.json", EXP_BASE);
    let out = bin().args(["validate", "--config", &cfg]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((report["m"].as_f64().unwrap() - 2.0).abs() < 1e-8);
    assert_eq!(report["pass"], true);

    let cfg = write_config(tmp.path(), "s.json", SUBCRITICAL);
    let out = bin().args(["validate", "--config", &cfg]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn solve_malthusian_writes_result_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.json", EXP_BASE);
    let out = tmp.path().join("out");
    let status = bin()
        .args(["solve", "malthusian", "--config", &cfg, "--out", out.to_str().unwrap()])
        .status()
        .unwrap();
    assert!(status.success());
    let sol = read_json(&out.join("malthusian.json"));
    assert!((sol["alpha_tilde"].as_f64().unwrap() - 1.0).abs() < 1e-8);
    let m = read_json(&out.join("manifest_solve_malthusian.json"));
    assert_eq!(m["outputs"][0], "malthusian.json");
    assert_eq!(m["spec_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn grids_follow_the_format_flag() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.json", EXP_BASE);
    let out = tmp.path().join("out");
    let o = out.to_str().unwrap();
    assert!(bin().args(["solve", "mean", "--config", &cfg, "--out", o]).status().unwrap().success());
    let text = std::fs::read_to_string(out.join("mean.csv")).unwrap();
    assert!(text.starts_with("t,rho,z,M_f,Gamma_f\n"));
    assert!(!text.contains('\r'));
    assert!(bin()
        .args(["solve", "mean", "--config", &cfg, "--out", o, "--format", "json"])
        .status()
        .unwrap()
        .success());
    let rows = read_json(&out.join("mean.json"));
    let last = rows.as_array().unwrap().last().unwrap();
    assert!((last["M_f"].as_f64().unwrap() / 12f64.exp() - 1.0).abs() < 1e-3);
}

#[test]
fn simulate_and_report() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.json", EXP_BASE);
    let out = tmp.path().join("out");
    let o = out.to_str().unwrap();
    let status = bin()
        .args(["simulate", "--config", &cfg, "--out", o, "--trajectories", "50", "--seed", "7"])
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(out.join("trajectories.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("traj,seed,t,pop,sum_f,W_f,A_f,extinct,truncated"));
    // five default observation times per trajectory
    assert_eq!(lines.count(), 250);
    assert!(bin().args(["report", "--config", &cfg, "--out", o]).status().unwrap().success());
    let report = read_json(&out.join("report.json"));
    assert_eq!(report["artifacts"]["trajectories.csv"]["rows"], 250);
    assert!(report["artifacts"]["manifest_simulate.json"].is_object());
}

#[test]
fn bad_inputs_exit_nonzero() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "bad.json", r#"{"alpha": 3}"#);
    assert_eq!(bin().args(["validate", "--config", &cfg]).status().unwrap().code(), Some(2));
    assert_eq!(bin().args(["solve", "nothing", "--config", &cfg]).status().unwrap().code(), Some(2));
    assert_eq!(bin().args(["validate"]).status().unwrap().code(), Some(2));
}
