use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn softcbf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_softcbf"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn run_example1_passes_and_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("example1.json");
    let out = softcbf(&["run", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap(), "--seed", "7"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["trace.csv", "report.json", "states.csv", "inputs.csv", "barriers.csv"] {
        assert!(dir.path().join(f).is_file(), "missing {f}");
    }
    let report = read_json(&dir.path().join("report.json"));
    assert_eq!(report["seed"], 7);
    assert_eq!(report["passed"], true);
    assert_eq!(report["outcome"]["kind"], "completed");
    let trace = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    let header: Vec<&str> = trace.lines().next().unwrap().split(',').collect();
    for f in ["states.csv", "inputs.csv", "barriers.csv"] {
        let text = std::fs::read_to_string(dir.path().join(f)).unwrap();
        let cols: Vec<&str> = text.lines().next().unwrap().split(',').collect();
        assert_eq!(cols[0], "t");
        assert!(cols.iter().all(|c| header.contains(c)), "{f}: {cols:?}");
        assert_eq!(text.lines().count(), trace.lines().count());
    }
}

#[test]
fn zero_duration_writes_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("example1.json");
    let out = softcbf(&[
        "run", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap(),
        "--set", "duration=0",
    ]);
    assert_eq!(code(&out), 0);
    let trace = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 2);
    let report = read_json(&dir.path().join("report.json"));
    assert_eq!(report["passed"], true);
    assert_eq!(report["rows"], 1);
}

#[test]
fn start_inside_obstacle_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("example1.json");
    let out = softcbf(&[
        "run", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap(),
        "--set", "x0=[-5,-5.5,0,0]",
    ]);
    assert!(matches!(code(&out), 1 | 3));
    let report = read_json(&dir.path().join("report.json"));
    assert_eq!(report["initial"]["in_s"], false);
    assert_eq!(report["passed"], false);
}

#[test]
fn config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\n  \"id\": \"x\",\n  \"map\": 3\n}\n").unwrap();
    let out = softcbf(&["run", "--config", bad.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));

    let cfg = config("example1.json");
    let out = softcbf(&["run", "--config", cfg.to_str().unwrap(), "--set", "filter.rhoo=1"]);
    assert_eq!(code(&out), 2);
    let out = softcbf(&["run", "--config", cfg.to_str().unwrap(), "--set", "dt_integrator=0.003"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn validate_accepts_both_examples() {
    for name in ["example1.json", "example3.json"] {
        let cfg = config(name);
        let out = softcbf(&["validate", "--config", cfg.to_str().unwrap(), "--samples", "40"]);
        assert_eq!(code(&out), 0, "{name}: {}", String::from_utf8_lossy(&out.stdout));
    }
}

#[test]
fn validate_rejects_wrong_declared_degree() {
    let cfg = config("example1.json");
    let out = softcbf(&[
        "validate", "--config", cfg.to_str().unwrap(), "--samples", "20",
        "--set", "filter.barriers.7.degree=2",
        "--set", r#"filter.barriers.7.alphas=[{"kind":"linear","slope":1.0}]"#,
    ]);
    assert_eq!(code(&out), 1, "{}", String::from_utf8_lossy(&out.stdout));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL"));
}

#[test]
fn empty_sweep_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("example1.json");
    let out = softcbf(&[
        "sweep", "--config", cfg.to_str().unwrap(), "--goals", "", "--out", dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let summary = read_json(&dir.path().join("sweep.json"));
    assert_eq!(summary["reports"].as_array().unwrap().len(), 0);
}

#[test]
fn unreachable_goal_stays_safe() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("example1.json");
    let out = softcbf(&[
        "sweep", "--config", cfg.to_str().unwrap(), "--goals", "1.5,0; 3,4.5",
        "--set", "duration=20", "--out", dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 1);
    let summary = read_json(&dir.path().join("sweep.json"));
    let reports = summary["reports"].as_array().unwrap();
    assert_eq!(reports.len(), 2);
    assert_eq!(reports[0]["goal"][0], 1.5);
    assert_eq!(reports[1]["passed"], true);
    let far = &reports[0];
    assert_eq!(far["monitors"]["safety"], true);
    assert_eq!(far["monitors"]["convergence"], false);
    assert!(dir.path().join("goal_1.5_0/trace.csv").is_file());
}

#[test]
fn out_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("example1.json");
    let out = Command::new(env!("CARGO_BIN_EXE_softcbf"))
        .args(["run", "--config", cfg.to_str().unwrap(), "--set", "duration=0.01"])
        .env("SOFTCBF_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&out), 1);
    assert!(dir.path().join("report.json").is_file());
}

#[test]
fn default_sweep_passes_all_goals() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("example1.json");
    let out = softcbf(&["sweep", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    let summary = read_json(&dir.path().join("sweep.json"));
    let reports = summary["reports"].as_array().unwrap();
    assert_eq!(reports.len(), 4);
    assert!(reports.iter().all(|r| r["passed"] == true));
    let goals: Vec<f64> = reports.iter().map(|r| r["goal"][0].as_f64().unwrap()).collect();
    assert_eq!(goals, vec![-7.0, -1.0, 3.0, 7.0]);
}
