use std::fs;
use std::process::Command;

use gradabs_cli::{run, run_batch, ExperimentSpec, Registry, RunStatus, SuiteName, Target};
use serde_json::{json, Value};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gradabs"))
}

#[test]
fn exponents_spec_records_beta() {
    let dir = tempfile::tempdir().unwrap();
    let reg = Registry::open(dir.path().join("registry")).unwrap();
    let spec = ExperimentSpec::new("beta", Target::Exponents, json!({"dim": 2, "q": 1.25}));
    let rec = run(&spec, &reg, dir.path()).unwrap();
    assert_eq!(rec.status, RunStatus::Passed);
    assert!((rec.summary["beta"].as_f64().unwrap() - 3.0).abs() < 1e-14);
    assert!((rec.summary["radial_constant"].as_f64().unwrap() - 27.0).abs() < 1e-12);
    let index = reg.entries().unwrap();
    assert_eq!(index.len(), 1);
    assert_eq!(reg.load(&index[0]).unwrap(), rec);
}

#[test]
fn invalid_q_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let reg = Registry::open(dir.path().join("registry")).unwrap();
    let spec = ExperimentSpec::new("bad", Target::Exponents, json!({"dim": 2, "q": 2.5}));
    let err = run(&spec, &reg, dir.path()).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    assert!(reg.entries().unwrap().is_empty());
}

#[test]
fn rerun_reproduces_the_summary_hash() {
    let dir = tempfile::tempdir().unwrap();
    let reg = Registry::open(dir.path().join("registry")).unwrap();
    let spec = ExperimentSpec {
        seed: 7,
        ..ExperimentSpec::new("solve", Target::Solve, json!({"q": 1.3, "grid": {"n_r": 24, "n_theta": 24}}))
    };
    let a = run(&spec, &reg, dir.path()).unwrap();
    let b = run(&spec, &reg, dir.path()).unwrap();
    assert_eq!(a.summary_hash, b.summary_hash);
    assert_eq!(reg.entries().unwrap().len(), 1);
    let csv = fs::read_to_string(dir.path().join("solve/field.csv")).unwrap();
    assert!(csv.lines().find(|l| !l.starts_with('#')).unwrap().starts_with("r,theta,value"));
    let side: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("solve/field.json")).unwrap()).unwrap();
    assert!(side["tests"].as_str().unwrap().contains("boundary value problem"));
}

#[test]
fn name_clash_with_different_spec_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let reg = Registry::open(dir.path().join("registry")).unwrap();
    run(&ExperimentSpec::new("x", Target::Exponents, json!({"q": 1.25})), &reg, dir.path()).unwrap();
    let err = run(&ExperimentSpec::new("x", Target::Exponents, json!({"q": 1.4})), &reg, dir.path()).unwrap_err();
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn downstream_errors_are_captured() {
    let dir = tempfile::tempdir().unwrap();
    let reg = Registry::open(dir.path().join("registry")).unwrap();
    // widths must stay below half the reach of the half-disk
    let spec = ExperimentSpec::new("wide", Target::Collapse, json!({"q": 1.6, "widths": [0.9], "grid": {"n_r": 20, "n_theta": 17}}));
    let rec = run(&spec, &reg, dir.path()).unwrap();
    assert!(matches!(rec.status, RunStatus::Error { .. }));
    assert!(rec.summary["error"].is_string());
}

#[test]
fn seeded_probes_are_reproducible() {
    let d = gradabs::geometry::Domain::half_disk(2, 1.0);
    let a = gradabs_cli::experiments::random_probes(&d, 5, 3);
    assert_eq!(a, gradabs_cli::experiments::random_probes(&d, 5, 3));
    assert_ne!(a, gradabs_cli::experiments::random_probes(&d, 5, 4));
    assert!(a.iter().all(|x| x[1] > 0.0 && x[0].hypot(x[1]) < 0.7));
}

#[test]
fn batch_runs_in_parallel_and_indexes_everything() {
    let dir = tempfile::tempdir().unwrap();
    let reg = Registry::open(dir.path().join("registry")).unwrap();
    let specs: Vec<ExperimentSpec> = [1.2, 1.3, 1.4, 1.6]
        .iter()
        .enumerate()
        .map(|(k, q)| ExperimentSpec::new(format!("cap{k}"), Target::Capacity, json!({"dim": 2, "q": q, "family": "boundary"})))
        .collect();
    let recs: Vec<_> = run_batch(&specs, &reg, dir.path()).unwrap().into_iter().map(Result::unwrap).collect();
    let zero: Vec<bool> = recs.iter().map(|r| r.summary["zero"].as_bool().unwrap()).collect();
    assert_eq!(zero, [false, false, false, true]);
    assert_eq!(reg.entries().unwrap().len(), 4);
}

#[test]
fn constants_suite_passes_quickly() {
    let r = gradabs_cli::run_suite(SuiteName::Constants);
    assert!(r.all_passed(), "{}", r.table());
    assert!(r.wall_seconds < 1.0);
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let ok = bin().args(["--out", out, "constants", "--q", "1.25"]).output().unwrap();
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));
    assert!(String::from_utf8_lossy(&ok.stdout).contains("\"beta\": 3.0"));
    let bad = bin().args(["--out", out, "constants", "--q", "2.5"]).output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
    let verify = bin().args(["--out", out, "verify", "--suite", "constants"]).output().unwrap();
    assert_eq!(verify.status.code(), Some(0));
    assert!(dir.path().join("verify-constants/suite.csv").exists());
    let spec = dir.path().join("spec.json");
    fs::write(&spec, r#"[{"name": "a", "target": "exponents", "params": {"q": 1.5}}, {"name": "b", "target": "profile", "params": {"q": 1.3, "nodes": 1001}}]"#).unwrap();
    let run = bin().args(["--out", out, "run", spec.to_str().unwrap()]).output().unwrap();
    assert_eq!(run.status.code(), Some(0), "{}", String::from_utf8_lossy(&run.stderr));
    assert!(dir.path().join("b/profile.csv").exists() && dir.path().join("b/profile.json").exists());
    fs::write(&spec, r#"{"name": "c", "target": "exponents", "params": {"q": 1.5, "extra": 1}}"#).unwrap();
    assert_eq!(bin().args(["--out", out, "run", spec.to_str().unwrap()]).output().unwrap().status.code(), Some(2));
    assert_eq!(bin().args(["--grid", "12"]).arg("solve").output().unwrap().status.code(), Some(2));
}
