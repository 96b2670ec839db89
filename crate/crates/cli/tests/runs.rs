use std::fs;
use std::process::Command;

use peel_cli::{parse_config, run_experiment};

const SMALL: &str = r#"
[experiment]
regime = "unconstrained"
seed = 11
horizon = 200
dt = 0.1
record_stride = 20
closed_form_check = true

[shape]
p = 12
C = 4
N = 3

[sweep]
gamma_list = [0.1, 0.3]
"#;

#[test]
fn runs_are_deterministic_per_seed() {
    let cfg = parse_config(SMALL).unwrap();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ra = run_experiment(&cfg, Some(a.path()), true).unwrap();
    run_experiment(&cfg, Some(b.path()), false).unwrap();
    assert_eq!(ra.members.len(), 2);
    for name in ["run_000.csv", "run_001.csv"] {
        let x = fs::read_to_string(a.path().join(name)).unwrap();
        assert_eq!(x, fs::read_to_string(b.path().join(name)).unwrap());
        assert_eq!(x.lines().count(), 1 + 11);
    }
    assert!(a.path().join("summary.json").exists());
    assert!(a.path().join("plot_loss.svg").exists());
    for m in &ra.members {
        assert!(m.closed_form_error.unwrap() < 1e-2);
    }
}

#[test]
fn unknown_keys_exit_with_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    fs::write(&path, "[experiment]\nregime = \"unconstrained\"\nsteps = 3\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_peel")).arg("run").arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("steps"));
}

#[test]
fn verify_exits_zero_on_a_clean_build() {
    let out = Command::new(env!("CARGO_BIN_EXE_peel")).args(["verify", "--suite", "schedules"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
}
