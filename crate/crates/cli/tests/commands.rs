use std::fs;

use lmshoot_cli::{run, RunConfig};

fn cli(args: &[&str], out: &std::path::Path) -> i32 {
    let mut all = vec!["lmshoot"];
    all.extend_from_slice(args);
    all.extend_from_slice(&["--out", out.to_str().unwrap()]);
    run(all)
}

#[test]
fn invalid_dimension_exits_one_without_output() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    assert_eq!(cli(&["eigen", "--N", "0"], &out), 1);
    assert!(!out.exists());
}

#[test]
fn unknown_config_key_is_rejected() {
    assert!(RunConfig::from_json(r#"{"problem": {"N": 2}, "bogus": 1}"#).is_err());
    let cfg = RunConfig::from_json(r#"{"problem": {"N": 3, "R": 2.5}, "k": 2}"#).unwrap();
    assert_eq!(cfg.problem.dimension, 3);
    assert_eq!(cfg.k, 2);
    cfg.validate().unwrap();
}

#[test]
fn config_file_is_overridden_by_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("run.json");
    fs::write(&path, r#"{"problem": {"N": 1, "R": 3.0}, "eigen_count": 3}"#).unwrap();
    let out = tmp.path().join("o");
    let code = cli(
        &["eigen", "--config", path.to_str().unwrap(), "--R", "3.141592653589793"],
        &out,
    );
    assert_eq!(code, 0);
    let report: serde_json::Value =
        serde_json::from_slice(&fs::read(out.join("eigen.json")).unwrap()).unwrap();
    let text = report.to_string();
    assert!(text.contains("3.141592653589793"), "{text}");
}

#[test]
fn scan_range_must_avoid_guard_band() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    assert_eq!(cli(&["scan", "--d-lo", "0.5", "--d-hi", "1.5"], &out), 1);
    assert_eq!(
        cli(&["scan", "--N", "2", "--R", "3", "--d-lo", "1.1", "--d-hi", "2", "--precision", "double"], &out),
        0
    );
    let csv = fs::read_to_string(out.join("scan.csv")).unwrap();
    assert!(csv.lines().count() > 10);
}

#[test]
fn help_exits_zero() {
    assert_eq!(run(["lmshoot", "--help"]), 0);
    assert_eq!(run(["lmshoot", "frobnicate"]), 1);
}
