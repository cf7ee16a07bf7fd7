//! The `bernoulli` binary end to end: exit codes, artifacts, failure records.

use std::path::Path;
use std::process::{Command, Output};

const BASE: &str = "m = 40\nn_samples = 400\nkappa1 = 0.129\nkappa2 = 0.233\ncenter = 0.5\nr0 = 0.3\neps = 0.1\nq = 4\n";

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bernoulli")).current_dir(dir).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("run.cfg");
    std::fs::write(&p, text).unwrap();
    p.display().to_string()
}

fn failure_json(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("failure.json")).unwrap()).unwrap()
}

#[test]
fn missing_key_fails_and_names_it() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &BASE.replace("kappa2 = 0.233\n", ""));
    let out = run(tmp.path(), &["solve", "--config", &cfg, "--out", "o"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("kappa2"));
    let rec = failure_json(&tmp.path().join("o"));
    assert_eq!(rec["kind"], "MissingKey");
    assert_eq!(rec["command"], "solve");
}

#[test]
fn config_errors_report_the_line() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &format!("{BASE}# a comment\nstep_size = 3\n"));
    let out = run(tmp.path(), &["solve", "--config", &cfg, "--out", "o"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 10") && err.contains("step_size"), "{err}");
}

#[test]
fn verify_fem_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(tmp.path(), &["verify-fem", "--out", "v"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let conv = std::fs::read_to_string(tmp.path().join("v/convergence.csv")).unwrap();
    assert!(conv.starts_with("h,l2_error,order\n"));
    assert!(!tmp.path().join("v/failure.json").exists());
}

#[test]
fn solve_writes_artifacts_deterministically() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &format!("{BASE}max_iters = 3\ntarget_h = 0.04\n"));
    for dir in ["a", "b"] {
        let out = run(tmp.path(), &["solve", "--config", &cfg, "--out", dir, "--dump-mesh", "--snapshot-stride", "2"]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let a = tmp.path().join("a");
    let log = std::fs::read_to_string(a.join("iterations.csv")).unwrap();
    assert!(log.starts_with("iteration,j_eps,alpha,backtracks,max_displacement,kappa,convex"));
    assert_eq!(log.lines().count(), 5);
    assert_eq!(log, std::fs::read_to_string(tmp.path().join("b/iterations.csv")).unwrap());

    for f in ["boundary_initial.csv", "boundary_final.svg", "control_points_final.csv", "mesh_final.txt", "fields_final.csv"] {
        assert!(a.join(f).exists(), "{f} missing");
    }
    assert!(a.join("snapshots/boundary_00000.svg").exists());
    assert!(a.join("snapshots/boundary_00002.svg").exists());
    assert!(!a.join("snapshots/boundary_00001.svg").exists());
    let svg = std::fs::read_to_string(a.join("boundary_final.svg")).unwrap();
    assert_eq!(svg.matches("<path").count(), 3);
    let summary = std::fs::read_to_string(a.join("summary.txt")).unwrap();
    assert!(summary.contains("j_eps_initial = ") && summary.contains("kappa_fi = "));
    assert!(summary.contains("termination = max_iterations"));
}

#[test]
fn failed_checks_exit_nonzero_with_a_record() {
    let tmp = tempfile::tempdir().unwrap();
    // increasing ε: the distance to the unpenalized state grows
    let cfg = write_config(tmp.path(), &format!("{BASE}penalization_eps = 0.01, 0.1\n"));
    let out = run(tmp.path(), &["study-penalization", "--config", &cfg, "--out", "p"]);
    assert_eq!(out.status.code(), Some(1));
    let rec = failure_json(&tmp.path().join("p"));
    assert_eq!(rec["kind"], "CheckFailed");
    assert!(rec["checks"][0].as_str().unwrap().contains("distance_trend"));
}

#[test]
fn single_point_monotonicity_is_vacuous() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &format!("{BASE}monotonicity_a = 0.129\ntarget_h = 0.04\nmax_iters = 2\n"));
    let out = run(tmp.path(), &["study-monotonicity", "--config", &cfg, "--out", "m"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(tmp.path().join("m/monotonicity_profiles.csv").exists());
}
