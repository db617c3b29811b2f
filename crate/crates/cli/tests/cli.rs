use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn sat(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sat")).args(args).output().expect("binary runs")
}

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn run_then_verify_and_extract() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let cfg = scenario("single_static.json");
    stdout(&sat(&["run", "--config", cfg.to_str().unwrap(), "--seed", "3", "--out", out.to_str().unwrap()]));
    let trace = out.join("trace.jsonl");
    let csv = std::fs::read_to_string(out.join("metrics.csv")).unwrap();
    assert!(csv.starts_with("config,seed,mission_time,tracked_ratio,mean_tracking_time,mean_traveled\n"));
    assert!(csv.contains("single-static,3,"));

    let v = stdout(&sat(&["trace", "verify", "--in", trace.to_str().unwrap(), "--config", cfg.to_str().unwrap()]));
    assert!(v.contains("replay ok"));

    let paths = dir.path().join("paths.csv");
    stdout(&sat(&["trace", "paths", "--in", trace.to_str().unwrap(), "--out", paths.to_str().unwrap()]));
    let text = std::fs::read_to_string(paths).unwrap();
    assert_eq!(text.lines().next(), Some("entity,t,x,y,kind"));
    assert!(text.contains("target-0"));
}

#[test]
fn verify_rejects_a_tampered_trace() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenario("single_static.json");
    stdout(&sat(&["run", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]));
    let trace = dir.path().join("trace.jsonl");
    let text = std::fs::read_to_string(&trace).unwrap().replacen("\"x\":10.5", "\"x\":10.6", 1);
    std::fs::write(&trace, text).unwrap();
    let o = sat(&["trace", "verify", "--in", trace.to_str().unwrap(), "--config", cfg.to_str().unwrap()]);
    assert!(!o.status.success());
}

#[test]
fn monte_carlo_and_stats() {
    let dir = tempfile::tempdir().unwrap();
    let cfgs = dir.path().join("cfgs");
    std::fs::create_dir(&cfgs).unwrap();
    std::fs::copy(scenario("single_static.json"), cfgs.join("a.json")).unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let o = Command::new(env!("CARGO_BIN_EXE_sat"))
        .args(["mc", "--config-dir", cfgs.to_str().unwrap(), "--seeds", "1..4", "--out", a.to_str().unwrap()])
        .env("SAT_THREADS", "2")
        .output()
        .unwrap();
    stdout(&o);
    stdout(&sat(&["mc", "--config-dir", cfgs.to_str().unwrap(), "--seeds", "1..4", "--policy", "random", "--out", b.to_str().unwrap()]));
    let rows = std::fs::read_to_string(a.join("metrics.csv")).unwrap();
    assert_eq!(rows.lines().count(), 5);
    assert!(std::fs::read_to_string(b.join("summary.csv")).unwrap().contains("single-static/random,4,"));

    let s = sat(&["stats", "--metrics", a.join("metrics.csv").to_str().unwrap(), b.join("metrics.csv").to_str().unwrap(), "--metric", "mean-traveled"]);
    // identical samples have zero variance
    if s.status.success() {
        assert!(String::from_utf8_lossy(&s.stdout).starts_with("n_a,n_b,mean_a,mean_b,t,dof,p"));
    } else {
        assert!(String::from_utf8_lossy(&s.stderr).contains("variance"));
    }
}

#[test]
fn predictor_data_train_eval() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let weights = dir.path().join("w.json");
    stdout(&sat(&["gen-data", "--out", data.to_str().unwrap(), "--n", "4", "--kinds", "turning", "--seed", "2"]));
    assert_eq!(std::fs::read_dir(&data).unwrap().count(), 4);
    stdout(&sat(&["train-predictor", "--data", data.to_str().unwrap(), "--out", weights.to_str().unwrap(), "--epochs", "1", "--hidden-dim", "4"]));
    let e = stdout(&sat(&["eval-predictor", "--weights", weights.to_str().unwrap(), "--data", data.to_str().unwrap()]));
    let lines: Vec<&str> = e.lines().collect();
    assert_eq!(lines[0], "model,windows,ade,fde");
    assert!(lines[1].starts_with("lstm,") && lines[2].starts_with("cv,"));
}

#[test]
fn invalid_config_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"targets": 0}"#).unwrap();
    let o = sat(&["run", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("target"));
}
