use std::path::Path;
use std::process::{Command, Output};

use ipsdual::report::{read_rows, verdict_path};

fn ipsdual(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ipsdual"))
        .args(args)
        .env("IPSDUAL_OUT_DIR", dir)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn report_lands_in_out_dir_with_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    let o = ipsdual(dir.path(), &["stationary", "--n", "2", "--alpha", "0.7", "--delta", "1.3"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert!(out.contains("VERDICT stationary closed_form PASS"), "{out}");
    let path = dir.path().join("stationary.csv");
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("# ipsdual-csv v1\n#@ ipsdual "));
    assert!(text.contains("# alpha = 0.7"));
    let (cols, rows) = read_rows(&path).unwrap();
    assert_eq!(cols[0], "word");
    assert_eq!(rows.len(), 4);
    let total: f64 = rows.iter().map(|r| r[2].parse::<f64>().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-12);
    let (vcols, vrows) = read_rows(&verdict_path(&path)).unwrap();
    assert_eq!(vcols, ["comparison", "status", "value", "tolerance", "detail"]);
    assert!(vrows.iter().all(|r| r[1] == "PASS"));
}

#[test]
fn rerun_from_report_reproduces_exact_columns() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first.csv");
    let o = ipsdual(
        dir.path(),
        &["correlate", "--n", "3", "--sites", "1,3", "--beta", "0.4", "--replicas", "300", "--seed", "11", "--out", first.to_str().unwrap()],
    );
    assert!(o.status.success());
    let second = dir.path().join("second.csv");
    let o = ipsdual(dir.path(), &["correlate", "--config", first.to_str().unwrap(), "--out", second.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (_, a) = read_rows(&first).unwrap();
    let (_, b) = read_rows(&second).unwrap();
    assert_eq!(a, b);
    let body = |p: &Path| {
        std::fs::read_to_string(p).unwrap().lines().filter(|l| !l.starts_with("# out")).map(String::from).collect::<Vec<_>>()
    };
    assert_eq!(body(&first), body(&second));
}

#[test]
fn invalid_parameter_exits_two_with_json_record() {
    let dir = tempfile::tempdir().unwrap();
    let o = ipsdual(dir.path(), &["stationary", "--gamma", "-1"]);
    assert_eq!(o.status.code(), Some(2));
    let rec: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(rec["error"], "core.InvalidParameter");
    assert_eq!(rec["command"], "stationary");
}

#[test]
fn failed_tolerance_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = ipsdual(dir.path(), &["duality-check", "--n", "2", "--draws", "3", "--tol", "0"]);
    assert_eq!(o.status.code(), Some(1));
    let rec: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(rec["error"], "tolerance");
    assert_eq!(rec["failed"][0], "max_residual");
    assert!(dir.path().join("duality-check.csv").exists());
}

#[test]
fn unknown_run_file_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run.toml");
    std::fs::write(&run, "[absorption]\nn = 2\nwidth = 3\n").unwrap();
    let o = ipsdual(dir.path(), &["absorption", "--config", run.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let rec: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(rec["error"], "spec");
}

#[test]
fn flags_override_run_file() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run.toml");
    std::fs::write(&run, "seed = 4\n[absorption]\nn = 1\nbeta = 0\ndelta = 0\n").unwrap();
    let o = ipsdual(dir.path(), &["absorption", "--config", run.to_str().unwrap(), "--seed", "9"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(dir.path().join("absorption.csv")).unwrap();
    assert!(text.contains("#@ seed 9") && text.contains("# n = 1"));
    assert!(stdout(&o).contains("closed_form PASS"));
}

#[test]
fn simulate_writes_trajectory_attachment() {
    let dir = tempfile::tempdir().unwrap();
    let o = ipsdual(dir.path(), &["simulate", "--model", "gdcp", "--n", "3", "--replicas", "50", "--trajectory", "true"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (cols, rows) = read_rows(&dir.path().join("simulate.trajectory.csv")).unwrap();
    assert_eq!(cols, ["t", "event", "state_index"]);
    assert_eq!(rows[0][1], "init");
    let times: Vec<f64> = rows.iter().map(|r| r[0].parse().unwrap()).collect();
    assert!(times.windows(2).all(|w| w[0] <= w[1]) && *times.last().unwrap() <= 1.0);
}

#[test]
fn every_subcommand_runs_with_defaults() {
    let dir = tempfile::tempdir().unwrap();
    for sc in ipsdual::cli::SUBCOMMANDS {
        let o = ipsdual(dir.path(), &[sc.name, "--replicas", "200"].as_slice()[..if has_replicas(sc) { 3 } else { 1 }]);
        assert!(o.status.success(), "{}: {}", sc.name, String::from_utf8_lossy(&o.stderr));
        assert!(dir.path().join(format!("{}.csv", sc.name)).exists());
    }
}

fn has_replicas(sc: &ipsdual::cli::Subcommand) -> bool {
    sc.opts.iter().any(|o| o.key == "replicas")
}
