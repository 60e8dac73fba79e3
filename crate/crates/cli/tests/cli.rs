use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn ues(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ues")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn column(csv: &str, name: &str) -> Vec<f64> {
    let mut lines = csv.lines();
    let idx = lines.next().unwrap().split(',').position(|h| h == name).expect("column exists");
    lines.map(|l| l.split(',').nth(idx).unwrap().parse().unwrap()).collect()
}

#[test]
fn delay_run_converges_and_writes_files() {
    let dir = TempDir::new().unwrap();
    let out = ues(&["run", "--canonical", "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("delay.csv")).unwrap();
    assert!(csv.starts_with("t,theta,y,estimate,G,Hhat,eta\n"));
    let summary = read_json(&dir.path().join("delay.summary.json"));
    assert!(summary["final_input_error"].as_f64().unwrap() < 0.02);
    assert!(summary["conditions_passed"].as_bool().unwrap());
    assert!(summary.get("runtime_seconds").is_none());
    let rate = summary["decay_fit"]["rate"].as_f64().unwrap();
    assert!((0.03..=0.06).contains(&rate));
}

#[test]
fn diffusion_run_converges() {
    let dir = TempDir::new().unwrap();
    let out = ues(&["run", "--set", "mode=diffusion", "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let summary = read_json(&dir.path().join("diffusion.summary.json"));
    assert!(summary["final_input_error"].as_f64().unwrap() < 0.02);
    assert!(summary["runtime_seconds"].as_f64().is_some());
    assert_eq!(summary["conditions"].as_array().unwrap().len(), 3);
}

#[test]
fn canonical_runs_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let d = dir.path().to_str().unwrap();
    let args = ["run", "--canonical", "--set", "numerics.horizon=60", "--out-dir", d];
    assert_eq!(code(&ues(&args)), 0);
    let csv = fs::read(dir.path().join("delay.csv")).unwrap();
    let summary = fs::read(dir.path().join("delay.summary.json")).unwrap();
    assert_eq!(code(&ues(&args)), 0);
    assert_eq!(fs::read(dir.path().join("delay.csv")).unwrap(), csv);
    assert_eq!(fs::read(dir.path().join("delay.summary.json")).unwrap(), summary);
}

#[test]
fn config_echo_reparses_to_the_same_run() {
    let dir = TempDir::new().unwrap();
    let d = dir.path().to_str().unwrap();
    let cfg = dir.path().join("scenario.cfg");
    fs::write(&cfg, "# short run\nnumerics.horizon = 40\ndither.omega = 10\noutput.csv_path = first.csv\noutput.summary_path = first.json\n").unwrap();
    assert_eq!(code(&ues(&["run", "--canonical", "--config", cfg.to_str().unwrap(), "--out-dir", d])), 0);
    let echo = read_json(&dir.path().join("first.json"))["config"].as_str().unwrap().to_string();
    let echoed = dir.path().join("echo.cfg");
    fs::write(&echoed, echo.replace("first.csv", "second.csv").replace("first.json", "second.json")).unwrap();
    assert_eq!(code(&ues(&["run", "--canonical", "--config", echoed.to_str().unwrap(), "--out-dir", d])), 0);
    assert_eq!(fs::read(dir.path().join("first.csv")).unwrap(), fs::read(dir.path().join("second.csv")).unwrap());
}

#[test]
fn malformed_config_exits_2_with_line() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "mode = delay\nloop.k 0.03\n").unwrap();
    let out = ues(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
    assert_eq!(code(&ues(&["run", "--set", "loop.k=abc"])), 2);
    assert_eq!(code(&ues(&["run", "--config", "/nonexistent/x.cfg"])), 2);
    assert_eq!(code(&ues(&["frobnicate"])), 2);
}

#[test]
fn validate_reports_conditions() {
    let ok = ues(&["validate"]);
    assert_eq!(code(&ok), 0);
    let text = String::from_utf8_lossy(&ok.stdout);
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 2);
    let slow = ues(&["validate", "--set", "loop.k=0.015"]);
    assert_eq!(code(&slow), 1);
    assert!(String::from_utf8_lossy(&slow.stdout).contains("FAIL k > lambda/H"));
    let hot = ues(&["validate", "--set", "mode=diffusion", "--set", "dither.lambda=3", "--set", "loop.omega_h=10", "--set", "loop.k=5"]);
    assert_eq!(code(&hot), 1);
    assert!(String::from_utf8_lossy(&hot.stdout).contains("FAIL lambda < pi^2/(4D^2)"));
}

#[test]
fn averaged_delay_oracle_reaches_filter_limit() {
    let dir = TempDir::new().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = ues(&["oracle", "--set", "mode=averaged-delay", "--set", "numerics.horizon=400", "--out-dir", d]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("averaged-delay.csv")).unwrap();
    let eta = column(&csv, "eta_integrated");
    assert!((eta.last().unwrap() - 0.347826).abs() < 1e-5);
    let closed = column(&csv, "theta_closed");
    let integrated = column(&csv, "theta_integrated");
    for (a, b) in closed.iter().zip(&integrated) {
        assert!((a - b).abs() < 1e-8);
    }
}

#[test]
fn zero_initial_error_gives_zero_column() {
    let dir = TempDir::new().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = ues(&["oracle", "--set", "mode=averaged-delay", "--set", "oracle.theta0=0", "--set", "numerics.horizon=50", "--out-dir", d]);
    assert_eq!(code(&out), 0);
    let csv = fs::read_to_string(dir.path().join("averaged-delay.csv")).unwrap();
    assert!(column(&csv, "theta_integrated").iter().all(|v| *v == 0.0));
    assert!(column(&csv, "theta_closed").iter().all(|v| *v == 0.0));
}

#[test]
fn averaged_diffusion_trace_matches_series() {
    let dir = TempDir::new().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = ues(&["oracle", "--set", "mode=averaged-diffusion", "--set", "numerics.horizon=10", "--out-dir", d]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let summary = read_json(&dir.path().join("averaged-diffusion.summary.json"));
    assert!(summary["max_trace_gap"].as_f64().unwrap() < 1e-3);
    assert!(summary["max_estimate_gap"].as_f64().unwrap() < 1e-8);
}

#[test]
fn oracle_and_run_reject_each_others_modes() {
    assert_eq!(code(&ues(&["oracle"])), 2);
    assert_eq!(code(&ues(&["run", "--set", "mode=averaged-delay"])), 2);
}

#[test]
fn omega_sweep_reports_decreasing_residual() {
    let dir = TempDir::new().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = ues(&["sweep", "--canonical", "--param", "dither.omega", "--values", "5,10,20,40", "--out-dir", d]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let summary = read_json(&dir.path().join("sweep_summary.json"));
    let residuals: Vec<f64> =
        summary["rows"].as_array().unwrap().iter().map(|r| r["reweighted_residual"].as_f64().unwrap()).collect();
    assert_eq!(residuals.len(), 4);
    assert!(residuals.windows(2).all(|w| w[1] <= w[0]), "{residuals:?}");
    for i in 0..4 {
        assert!(dir.path().join(format!("sweep_dither_omega_{i}.csv")).exists());
    }
    let csv = fs::read_to_string(dir.path().join("sweep_summary.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
}

#[test]
fn gain_sweep_flag_flips_at_boundary() {
    let dir = TempDir::new().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = ues(&[
        "sweep", "--canonical", "--set", "numerics.horizon=100", "--param", "loop.k", "--values", "0.0195,0.0205", "--out-dir", d,
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let summary = read_json(&dir.path().join("sweep_summary.json"));
    let rows = summary["rows"].as_array().unwrap();
    assert_eq!(rows[0]["averaged_contracting"], Value::Bool(false));
    assert_eq!(rows[1]["averaged_contracting"], Value::Bool(true));
    assert_eq!(rows[0]["conditions_passed"], Value::Bool(false));
    assert_eq!(rows[1]["conditions_passed"], Value::Bool(true));
}

#[test]
fn sweep_usage_errors() {
    assert_eq!(code(&ues(&["sweep", "--param", "dither.omega", "--values", ""])), 2);
    assert_eq!(code(&ues(&["sweep", "--param", "dither.omega"])), 2);
    assert_eq!(code(&ues(&["sweep", "--param", "dither.phase", "--values", "1"])), 2);
    assert_eq!(code(&ues(&["sweep", "--param", "dither.omega", "--values", "-1"])), 2);
}

#[test]
fn failed_sweep_run_is_marked_and_exits_1() {
    let dir = TempDir::new().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = ues(&["sweep", "--canonical", "--set", "numerics.horizon=9000", "--param", "dither.omega", "--values", "5", "--out-dir", d]);
    assert_eq!(code(&out), 1);
    let summary = read_json(&dir.path().join("sweep_summary.json"));
    assert!(summary["rows"][0]["status"].as_str().unwrap().starts_with("failed"));
}

#[test]
fn numerical_failure_exits_1() {
    let dir = TempDir::new().unwrap();
    let out = ues(&["run", "--set", "numerics.horizon=9000", "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}
