use serde_json::{json, Value};
use std::path::Path;
use std::process::{Command, Output};

const REFERENCE: &str = include_str!("../../../configs/reference.json");

fn roslab(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_roslab"))
        .args(args)
        .env("ROSLAB_OUTPUT_DIR", out)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, cfg: &Value) -> String {
    let p = dir.join("config.json");
    std::fs::write(&p, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    p.to_string_lossy().into_owned()
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

fn reference() -> Value {
    serde_json::from_str(REFERENCE).unwrap()
}

fn exp(rate: f64) -> Value {
    json!({"family": "exponential", "params": {"rate": rate}})
}

#[test]
fn empty_arrival_config_gives_empty_log() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = json!({
        "system": {
            "classes": 1, "servers": 1, "weights": [1.0],
            "interarrival": [exp(1.0)],
            "first_arrival": [{"family": "deterministic", "params": {"value": 100.0}}],
            "service": [exp(1.0)], "patience": [exp(1.0)],
            "horizon": 5.0, "seed": 1
        }
    });
    let path = write_config(dir.path(), &cfg);
    let out = dir.path().join("out");
    let o = roslab(&["simulate", "-c", &path], &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let log = std::fs::read_to_string(out.join("log.jsonl")).unwrap();
    assert_eq!(log.lines().count(), 1, "header only");
    let paths = std::fs::read_to_string(out.join("paths.csv")).unwrap();
    assert!(paths.lines().skip(1).all(|l| l.split(',').nth(2) == Some("0")));
    assert_eq!(report(&out)["pass"], json!(true));
}

#[test]
fn invalid_weights_exit_2_naming_the_invariant() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = reference();
    cfg["system"]["weights"] = json!([0.6, 0.6]);
    let path = write_config(dir.path(), &cfg);
    let o = roslab(&["simulate", "-c", &path], &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("weights must sum to 1"));
}

#[test]
fn reference_log_matches_golden_hash() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), &reference());
    let out = dir.path().join("out");
    let o = roslab(&["simulate", "-c", &path], &out);
    assert_eq!(o.status.code(), Some(0));
    let r = report(&out);
    let m = &r["checks"][0]["metrics"];
    assert_eq!(m["hash"], reference()["golden_hash"]);
    assert_eq!(m["hash"], m["golden"]);
}

#[test]
fn wrong_golden_hash_is_a_suite_failure() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = reference();
    cfg["golden_hash"] = json!("00");
    let path = write_config(dir.path(), &cfg);
    let o = roslab(&["simulate", "-c", &path], &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn corrupted_log_fails_integrity() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), &reference());
    let sim = dir.path().join("sim");
    assert_eq!(roslab(&["simulate", "-c", &path], &sim).status.code(), Some(0));
    let text = std::fs::read_to_string(sim.join("log.jsonl")).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let i = lines.iter().position(|l| l.contains("\"kind\":\"renege\"") || l.contains("\"kind\":\"completion\"")).unwrap();
    let mut rec: Value = serde_json::from_str(&lines[i]).unwrap();
    rec["queue_lengths"][0] = json!(rec["queue_lengths"][0].as_u64().unwrap() + 3);
    lines[i] = rec.to_string();
    let bad = dir.path().join("bad.jsonl");
    std::fs::write(&bad, lines.join("\n")).unwrap();

    let out = dir.path().join("verify");
    let o = roslab(&["verify", "-c", &path, "--log", bad.to_str().unwrap()], &out);
    assert_eq!(o.status.code(), Some(1));
    let r = report(&out);
    assert_eq!(r["checks"][0]["name"], json!("log_integrity"));
    assert_eq!(r["checks"][0]["pass"], json!(false));

    let good = roslab(&["verify", "-c", &path, "--log", sim.join("log.jsonl").to_str().unwrap()], &out);
    assert_eq!(good.status.code(), Some(0));
}

#[test]
fn zero_replications_is_a_precondition_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = reference();
    cfg["tolerances"]["martingale_replications"] = json!(0);
    let path = write_config(dir.path(), &cfg);
    let o = roslab(&["verify", "-c", &path, "--suite", "martingale"], &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("precondition"));
}

#[test]
fn empty_beta_set_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = reference();
    cfg["betas"] = json!([]);
    let path = write_config(dir.path(), &cfg);
    let o = roslab(&["diffusion", "-c", &path], &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn underloaded_config_rejected_by_centering_suites() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = reference();
    cfg["system"]["interarrival"] = json!([exp(0.5), exp(0.5)]);
    let path = write_config(dir.path(), &cfg);
    let o = roslab(&["converge", "-c", &path], &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("load > 1"));
}

#[test]
fn flag_overrides_environment_output_dir() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), &reference());
    let env_out = dir.path().join("env");
    let flag_out = dir.path().join("flag");
    let o = roslab(&["renewal-check", "-c", &path, "--suite", "x", "-o", flag_out.to_str().unwrap()], &env_out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(flag_out.join("report.json").exists());
    assert!(!env_out.exists());
}

#[test]
fn missing_config_file_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = roslab(&["fluid", "-c", "/nonexistent/config.json"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}
