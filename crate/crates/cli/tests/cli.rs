use std::path::Path;
use std::process::{Command, Output};

use flattop::sim::{run_scenario, EstimatorKind, HarnessConfig, HARNESS_TABLE_TOL};
use flattop::Scenario;
use serde_json::Value;

fn flattop(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_flattop")).args(args).output().unwrap()
}

fn normal_csv(dir: &Path, n: usize) -> String {
    let path = dir.join("sample.csv");
    let mut text = String::from("time,event\n");
    // deterministic spread-out sample
    for i in 0..n {
        let u = (i as f64 + 0.5) / n as f64;
        text.push_str(&format!("{},1\n", flattop::special::normal_quantile(u)));
    }
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

/// First stderr line: the resolved configuration.
fn echoed(out: &Output) -> Value {
    let err = String::from_utf8_lossy(&out.stderr);
    serde_json::from_str(err.lines().next().unwrap()).unwrap()
}

fn error_json(out: &Output) -> Value {
    let err = String::from_utf8_lossy(&out.stderr);
    serde_json::from_str(err.lines().last().unwrap()).unwrap()
}

#[test]
fn estimate_emits_grid_csv_and_resolved_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let input = normal_csv(dir.path(), 100);
    let out = flattop(&[
        "estimate", "--input", &input, "--kernel", "trapezoid", "--c", "0.75", "--bandwidth", "auto", "--grid",
        "-3:3:121",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = String::from_utf8(out.stdout.clone()).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows[0], "t,value");
    assert_eq!(rows.len(), 122);
    let cfg = echoed(&out);
    assert_eq!(cfg["schema"], 1);
    assert_eq!(cfg["command"], "estimate");
    let bw = &cfg["bandwidth"];
    for key in ["C", "epsilon", "effective_c", "freq_max", "freq_points", "mode"] {
        assert!(!bw[key].is_null(), "missing {key}");
    }
    assert_eq!(cfg["kernel"]["effective_c"], 0.75);
}

#[test]
fn replaying_the_echoed_config_is_bitwise_identical() {
    let dir = tempfile::tempdir().unwrap();
    let input = normal_csv(dir.path(), 80);
    let saved = dir.path().join("run.json");
    let first = flattop(&[
        "survival", "--input", &input, "--kernel", "smooth-trapezoid", "--table-tol", "1e-6", "--standardize",
        "--save-config", saved.to_str().unwrap(),
    ]);
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    let again = flattop(&["--config", saved.to_str().unwrap()]);
    assert!(again.status.success());
    assert_eq!(first.stdout, again.stdout);
    assert_eq!(echoed(&first), echoed(&again));
}

#[test]
fn input_files_are_not_modified() {
    let dir = tempfile::tempdir().unwrap();
    let input = normal_csv(dir.path(), 50);
    let before = std::fs::read(&input).unwrap();
    let out = flattop(&["estimate", "--input", &input, "--kernel", "gaussian", "--bandwidth", "cv", "--json"]);
    assert!(out.status.success());
    assert_eq!(before, std::fs::read(&input).unwrap());
    let body: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(body["bandwidth"]["method"], "cv");
    assert_eq!(body["t"].as_array().unwrap().len(), 201);
}

#[test]
fn malformed_row_names_its_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    std::fs::write(&path, "time,event\n1.0,1\n2.0,1\noops,1\n").unwrap();
    let out = flattop(&["estimate", "--input", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));
    let e = error_json(&out);
    assert_eq!(e["error"]["kind"], "parse");
    assert_eq!(e["error"]["line"], 4);
}

#[test]
fn exit_codes_by_failure_class() {
    let dir = tempfile::tempdir().unwrap();
    let input = normal_csv(dir.path(), 30);
    let missing = dir.path().join("missing.csv");

    let usage = flattop(&["estimate"]);
    assert_eq!(usage.status.code(), Some(2));
    assert_eq!(error_json(&usage)["error"]["kind"], "usage");

    let cv_flat = flattop(&["estimate", "--input", &input, "--bandwidth", "cv"]);
    assert_eq!(cv_flat.status.code(), Some(2));

    let io = flattop(&["estimate", "--input", missing.to_str().unwrap()]);
    assert_eq!(io.status.code(), Some(3));

    let domain = flattop(&["estimate", "--input", &input, "--c", "1.5"]);
    assert_eq!(domain.status.code(), Some(5));
    assert_eq!(error_json(&domain)["error"]["kind"], "domain");

    let numerical = flattop(&["kernel-table", "--table-tol", "1e-300"]);
    assert_eq!(numerical.status.code(), Some(6));
    assert_eq!(error_json(&numerical)["error"]["kind"], "numerical");
}

#[test]
fn bandwidth_reports_cutoff_and_writes_ecf() {
    let dir = tempfile::tempdir().unwrap();
    let input = normal_csv(dir.path(), 200);
    let ecf = dir.path().join("ecf.csv");
    let out = flattop(&[
        "bandwidth", "--input", &input, "--bw-mode", "threshold", "--bw-C", "2", "--ecf-out",
        ecf.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let body: Value = serde_json::from_slice(&out.stdout).unwrap();
    let h = body["h"].as_f64().unwrap();
    let cutoff = body["cutoff"].as_f64().unwrap();
    assert_eq!(h, 0.75 / cutoff);
    let rows = std::fs::read_to_string(&ecf).unwrap();
    assert_eq!(rows.lines().count(), 513);
}

#[test]
fn deficiency_expansions() {
    let out = flattop(&[
        "deficiency", "--lead", "1", "--rate", "1", "--second-s", "0", "--second-t", "2", "--kind", "power:0.5",
        "--n", "1e6",
    ]);
    assert!(out.status.success());
    let body: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(body["limit"], 2.0);
    assert!((body["scaled"].as_f64().unwrap() / 2.0 - 1.0).abs() < 0.01);
    let mismatched = flattop(&["deficiency", "--lead", "1", "--rate", "1", "--second-s", "0", "--n", "10"]);
    assert_eq!(mismatched.status.code(), Some(2));
}

#[test]
fn simulate_matches_the_library_harness() {
    let out = flattop(&["simulate", "--scenario", "weibull-censored", "--n", "15", "--reps", "30", "--seed", "5"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let cfg = HarnessConfig::new(HARNESS_TABLE_TOL).unwrap();
    let report = run_scenario(&Scenario::weibull_censored(vec![15], 30, 5), &EstimatorKind::ALL, &cfg).unwrap();
    assert_eq!(String::from_utf8_lossy(&out.stdout), report.to_csv());
    let echo = echoed(&out);
    assert_eq!(echo["bw_C"], 0.5);
    assert_eq!(echo["rules"].as_array().unwrap().len(), 2);
}

#[test]
fn zero_bias_with_one_replication_is_flagged() {
    let out = flattop(&["simulate", "--zero-bias", "--n", "50", "--reps", "1", "--json", "--table-tol", "1e-6"]);
    assert!(out.status.success());
    let body: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(body["insufficient_replications"], true);
    assert!(body["points"][0]["se"].is_null());
}

#[test]
fn kernel_table_writes_a_loadable_binary() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("trap.bin");
    let out = flattop(&["kernel-table", "--table-tol", "1e-6", "--output", path.to_str().unwrap()]);
    assert!(out.status.success());
    let table = flattop::KernelTable::read_binary(std::fs::File::open(&path).unwrap()).unwrap();
    assert_eq!(table.spec().c, 0.75);
    assert_eq!(table.tol(), 1e-6);
}
