mod common;

use common::{reference, single};
use roslab::harness::*;
use roslab::scaling::ScalingSchedule;
use roslab::simulator::{simulate, EventKind};
use roslab::Error;
use std::path::PathBuf;

fn cfg() -> ExperimentConfig {
    ExperimentConfig::new(reference(5.0))
}

#[test]
fn minimal_json_takes_defaults() {
    let json = format!(r#"{{"system": {}}}"#, serde_json::to_string(&reference(5.0)).unwrap());
    let c = ExperimentConfig::from_json(&json).unwrap();
    assert_eq!(c, cfg());
    assert_eq!(c.tolerances.martingale_replications, 2_000);
    assert_eq!(c.schedule.m_values, vec![100, 1_000, 10_000]);
}

#[test]
fn invalid_documents_are_config_errors() {
    assert!(matches!(ExperimentConfig::from_json("{"), Err(Error::Config(_))));
    let mut c = cfg();
    c.workers = Some(0);
    assert!(matches!(c.validate(), Err(Error::Config(_))));
    let mut c = cfg();
    c.betas = vec![-1.0];
    assert!(matches!(c.validate(), Err(Error::Config(_))));
    let mut c = cfg();
    c.schedule.m_values = vec![100, 10];
    assert!(matches!(c.validate(), Err(Error::Config(_))));
    let mut c = cfg();
    c.system.weights = vec![0.7, 0.4];
    assert!(c.validate().is_err());
}

#[test]
fn output_dir_precedence() {
    let mut c = cfg();
    c.output_dir = Some(PathBuf::from("from-config"));
    assert_eq!(c.resolve_output_dir(Some(PathBuf::from("flag"))), PathBuf::from("flag"));
    assert_eq!(c.resolve_output_dir(None), PathBuf::from("from-config"));
}

#[test]
fn fluid_suites_need_overload() {
    let c = ExperimentConfig::new(single(0.5, 1.0, 1.0, 5.0));
    assert!(matches!(c.require_overload(), Err(Error::Config(_))));
    assert!(matches!(converge(&c, false), Err(Error::Config(_))));
    assert!(matches!(diffusion_compare(&c, false), Err(Error::Config(_))));
    assert!(cfg().require_overload().unwrap() > 1.0);
}

#[test]
fn converge_needs_initial_mass() {
    let mut c = cfg();
    c.system.initial_queues = vec![];
    assert!(matches!(converge(&c, false), Err(Error::Precondition(_))));
}

#[test]
fn converge_singleton_has_no_monotone_verdict() {
    let mut c = cfg();
    c.schedule = ScalingSchedule { m_values: vec![20], replications: 5 };
    let r = converge(&c, true).unwrap();
    assert_eq!(r.checks[0].pass, None);
    assert!(r.checks[1].pass.is_some());
    assert_eq!(r.rows.len(), 5 * 501 * 2);

    c.schedule = ScalingSchedule { m_values: vec![1, 20], replications: 5 };
    let r = converge(&c, false).unwrap();
    assert_eq!(r.checks[0].pass, None);
    assert!(r.rows.is_empty());
}

#[test]
fn diffusion_singleton_has_no_trend() {
    let mut c = cfg();
    c.tolerances.diffusion_m = vec![50];
    c.tolerances.diffusion_replications = 10;
    c.tolerances.diffusion_times = vec![1.0];
    c.tolerances.sde_paths = 200;
    let r = diffusion_compare(&c, true).unwrap();
    assert_eq!(r.checks.len(), 2);
    for check in &r.checks {
        assert_eq!(check.pass, None);
        assert!(!check.metrics.contains_key("trend"));
        for e in check.metrics["comparisons"].as_array().unwrap() {
            assert!(e.get("trend").is_none());
            assert!(e["per_m"][0]["variance_ratio"].is_number());
        }
    }
    assert_eq!(r.rows.len(), 2);
    assert!(r.rows[0].iter().any(|row| row.source == "prelimit" && row.m == 50));
    let mut c = cfg();
    c.betas.clear();
    assert!(matches!(diffusion_compare(&c, false), Err(Error::Config(_))));
}

#[test]
fn zero_replications_are_a_precondition_error() {
    let mut c = cfg();
    c.tolerances.martingale_replications = 0;
    assert!(matches!(martingale_nullity(&c), Err(Error::Precondition(_))));
    let mut c = cfg();
    c.tolerances.qv_replications = 0;
    assert!(matches!(qv_match(&c), Err(Error::Precondition(_))));
}

#[test]
fn corrupted_log_fails_integrity() {
    let log = simulate(&reference(5.0), 3).unwrap();
    assert_eq!(log_integrity(&log).pass, Some(true));
    let mut bad = log.clone();
    let i = bad.records.iter().position(|r| r.kind == EventKind::Arrival).unwrap();
    bad.records[i].queue_lengths[1] += 2;
    assert!(!scan_conservation(&bad).violations.is_empty());
    assert_eq!(log_integrity(&bad).pass, Some(false));
}

#[test]
fn golden_hash_mismatch_fails() {
    let sys = reference(5.0);
    let hash = simulate(&sys, sys.seed).unwrap().hash();
    assert_eq!(determinism(&sys, Some(&hash)).unwrap().pass, Some(true));
    assert_eq!(determinism(&sys, Some("00")).unwrap().pass, Some(false));
}

#[test]
fn reports_are_byte_identical_across_runs_and_pools() {
    let mut c = cfg();
    c.suites = vec!["renewal_identity".into(), "conservation".into(), "determinism".into()];
    c.tolerances.conservation_replications = 20;
    let dirs: Vec<_> = (0..3).map(|_| tempfile::tempdir().unwrap()).collect();
    cmd_verify(&c, dirs[0].path()).unwrap();
    cmd_verify(&c, dirs[1].path()).unwrap();
    c.workers = Some(1);
    let r = cmd_verify(&c, dirs[2].path()).unwrap();
    assert!(r.pass);
    assert_eq!(r.checks.len(), 3);
    let read = |d: &tempfile::TempDir| std::fs::read(d.path().join("report.json")).unwrap();
    assert_eq!(read(&dirs[0]), read(&dirs[1]));
    assert_eq!(read(&dirs[0]), read(&dirs[2]));
    assert!(dirs[0].path().join("timing.json").exists());
}

#[test]
fn every_check_states_its_criterion() {
    let c = cfg();
    let checks = [
        renewal_identity(&c.tolerances, 1).unwrap(),
        conservation(&c.system, 5, 1).unwrap(),
        invariant_check(&invariant_reference(), 10.0).unwrap(),
    ];
    for check in checks {
        assert!(!check.criterion.is_empty());
        assert!(check.tolerance.is_finite());
        assert_eq!(check.pass, Some(true), "{check:?}");
    }
}
