use selfnorm::error::Error;
use selfnorm::harness::{compare_to_limit, run_experiment_with_workers, ExperimentConfig, ExperimentKind};
use selfnorm::cluster::ClusterModel;
use selfnorm::limit::LepageSampler;
use std::path::Path;

const GREENWOOD: &str = r#"
name = "gw"
kind = "verify"
seed = 7

[model]
kind = "iid"
noise = { kind = "pareto", alpha = 0.5, q_plus = 1.0 }

[simulation]
n = 5000
reps = 300

[verify]
statistics = [{ stat = "greenwood", p = 2.0 }, { stat = "ratio_max" }]
"#;

fn config_in(text: &str, dir: &Path) -> ExperimentConfig {
    let mut c = ExperimentConfig::from_toml(text).unwrap();
    c.output.dir = dir.to_path_buf();
    c
}

#[test]
fn greenwood_verify_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config_in(GREENWOOD, tmp.path());
    assert_eq!(cfg.kind, ExperimentKind::Verify);
    let report = run_experiment_with_workers(&cfg, Some(1)).unwrap();
    let row = report.row("greenwood_p2").unwrap();
    assert!((row.analytic.unwrap() - 0.5).abs() < 1e-12);
    assert!(report.all_pass(), "{report}");
    assert!(tmp.path().join("gw").join("report.json").exists());
    assert_eq!(report.metadata.workers, 1);
    assert_eq!(report.metadata.config_hash.len(), 64);
}

#[test]
fn zero_reps_lists_every_violation() {
    let text = GREENWOOD.replace("reps = 300", "reps = 0").replace("n = 5000", "n = 0");
    let cfg = ExperimentConfig::from_toml(&text).unwrap();
    match cfg.validate() {
        Err(Error::Validation(msgs)) => {
            assert!(msgs.iter().any(|m| m.contains("simulation.reps")), "{msgs:?}");
            assert!(msgs.iter().any(|m| m.contains("simulation.n")), "{msgs:?}");
        }
        other => panic!("expected validation error, got {other:?}"),
    }
    let tmp = tempfile::tempdir().unwrap();
    assert!(run_experiment_with_workers(&config_in(&text, tmp.path()), Some(1)).is_err());
}

#[test]
fn unknown_fields_are_rejected() {
    let text = GREENWOOD.replace("reps = 300", "reps = 300\nrepz = 3");
    assert!(ExperimentConfig::from_toml(&text).is_err());
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config_in(GREENWOOD, tmp.path());
    run_experiment_with_workers(&cfg, Some(1)).unwrap();
    let first = std::fs::read(tmp.path().join("gw").join("batch.csv")).unwrap();
    run_experiment_with_workers(&cfg, Some(1)).unwrap();
    let second = std::fs::read(tmp.path().join("gw").join("batch.csv")).unwrap();
    assert!(!first.is_empty());
    assert_eq!(first, second);
}

#[test]
fn worker_count_does_not_change_results() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config_in(GREENWOOD, tmp.path());
    let a = run_experiment_with_workers(&cfg, Some(1)).unwrap();
    let b = run_experiment_with_workers(&cfg, Some(3)).unwrap();
    assert_eq!(a.rows, b.rows);
    assert_eq!(a.metadata.config_hash, b.metadata.config_hash);
}

#[test]
fn toml_round_trip() {
    let cfg = ExperimentConfig::from_toml(GREENWOOD).unwrap();
    let back = ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
    assert_eq!(cfg, back);
}

#[test]
fn seed_changes_hash() {
    let a = ExperimentConfig::from_toml(GREENWOOD).unwrap();
    let mut b = a.clone();
    b.seed = 8;
    let ha = selfnorm::harness::config_hash(&a).unwrap();
    assert_ne!(ha, selfnorm::harness::config_hash(&b).unwrap());
    let mut c = a.clone();
    c.output.workers = Some(2);
    assert_eq!(ha, selfnorm::harness::config_hash(&c).unwrap());
}

#[test]
fn mismatched_limit_is_detected() {
    let draw = |alpha: f64, seed: u64| -> Vec<f64> {
        let c = ClusterModel::iid(alpha, 1.0).unwrap();
        let s = LepageSampler::new(&c, 2.0, 500, seed).unwrap();
        s.sample_many(4000, seed).iter().map(|d| d.xi / d.eta).collect()
    };
    let same = compare_to_limit("same", &draw(0.5, 1), &draw(0.5, 2), &[0.5, 1.0], 3.0, 1.5, None).unwrap();
    assert!(same.iter().all(|r| r.pass), "{same:?}");
    let wrong = compare_to_limit("wrong", &draw(0.5, 1), &draw(0.8, 2), &[0.5, 1.0], 3.0, 1.5, None).unwrap();
    assert!(!wrong[0].pass, "{wrong:?}");
    assert!(compare_to_limit("few", &[1.0; 10], &[1.0; 10], &[], 3.0, 1.5, None).is_err());
}
