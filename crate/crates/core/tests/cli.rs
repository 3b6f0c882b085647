use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn korteweg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_korteweg")).args(args).output().expect("binary runs")
}

fn config(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(korteweg(&["--help"]).status.code(), Some(0));
    assert_eq!(korteweg(&["--version"]).status.code(), Some(0));
}

#[test]
fn unknown_flag_is_invalid_input() {
    assert_eq!(korteweg(&["simulate", "--bogus"]).status.code(), Some(1));
    assert_eq!(korteweg(&["verify", "--suite", "nonsense"]).status.code(), Some(1));
}

#[test]
fn bad_viscosity_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(config("small_data_nhv1.toml")).unwrap();
    let bad = text.lines().map(|l| if l.trim_start().starts_with("lambda") { "lambda = -1.5" } else { l }).collect::<Vec<_>>().join("\n");
    assert!(bad.contains("lambda = -1.5"));
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, bad).unwrap();
    let out = korteweg(&["simulate", "--config", s(&path), "--out", s(dir.path()), "--quiet"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("2μ+λ>0 violated"));
}

#[test]
fn verify_suite_passes() {
    let out = korteweg(&["verify", "--suite", "tensor-identity"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("PASS tensor-identity"));
}

#[test]
fn simulate_is_deterministic() {
    let cfg = config("small_data_nhv1.toml");
    let runs: Vec<Vec<u8>> = (0..2)
        .map(|_| {
            let dir = tempfile::tempdir().unwrap();
            let out = korteweg(&["simulate", "--config", s(&cfg), "--out", s(dir.path()), "--seed", "5", "--quiet"]);
            assert_eq!(out.status.code(), Some(0));
            assert!(dir.path().join("manifest.json").exists());
            std::fs::read(dir.path().join("diagnostics.csv")).unwrap()
        })
        .collect();
    assert!(!runs[0].is_empty());
    assert_eq!(runs[0], runs[1]);
}

#[test]
fn semigroup_writes_fit() {
    let dir = tempfile::tempdir().unwrap();
    let out = korteweg(&["semigroup", "--kappa", "0.04", "--block", "3", "--out", s(dir.path()), "--quiet"]);
    assert_eq!(out.status.code(), Some(0));
    let json: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("semigroup.json")).unwrap()).unwrap();
    assert_eq!(json["result"]["block"], 3);
    assert!(json["result"]["k_l_non_increasing"].as_bool().unwrap());
    assert!(json["result"]["c_fit"].as_f64().unwrap() > 0.0);
}

#[test]
fn besov_of_configured_data() {
    let out = korteweg(&["besov", "--config", s(&config("small_data_nhv1.toml")), "--s", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(json["value"].as_f64().unwrap() > 0.0);
}
