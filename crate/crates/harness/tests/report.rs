use sampson_harness::config::SceneConfig;
use sampson_harness::experiments::{bounds, recompute_aggregates, relpose, threeview, twoview, vp, RunOptions};
use sampson_harness::report::{export, import_json, import_records_csv, ExperimentReport, Format};

const SCHEMA: &str = include_str!("../schema/experiment_report.schema.json");

fn small_threeview(seed: u64) -> threeview::ThreeViewConfig {
    threeview::ThreeViewConfig {
        scene: SceneConfig { seed, n_samples: 300, n_cameras: 3, ..SceneConfig::default() },
        ..Default::default()
    }
}

fn validate(report: &ExperimentReport) {
    let schema: serde_json::Value = serde_json::from_str(SCHEMA).unwrap();
    let instance: serde_json::Value = serde_json::from_str(&report.to_json_string()).unwrap();
    let v = jsonschema::validator_for(&schema).unwrap();
    let errors: Vec<String> = v.iter_errors(&instance).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{errors:?}");
}

#[test]
fn json_round_trip_is_exact() {
    let r = threeview::run(&small_threeview(3), &RunOptions::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("r.json");
    export(&r, Format::Json, &p).unwrap();
    let back = import_json(&p).unwrap();
    assert_eq!(back, r);
    r.check_invariants().unwrap();
}

#[test]
fn csv_records_reproduce_aggregates() {
    let cfg = twoview::TwoViewConfig {
        scene: SceneConfig { n_samples: 200, n_cameras: 2, ..SceneConfig::default() },
        sigmas: vec![0.5, 2.0],
    };
    let r = twoview::run(&cfg, &RunOptions::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("r.csv");
    export(&r, Format::Csv, &p).unwrap();
    let records = import_records_csv(&p).unwrap();
    assert_eq!(records, r.records);
    assert_eq!(recompute_aggregates(&r.experiment, &records).unwrap(), r.aggregates);
}

#[test]
fn empty_report_is_a_valid_file() {
    let r = ExperimentReport::new(threeview::NAME, 0, serde_json::json!({}));
    validate(&r);
    let dir = tempfile::tempdir().unwrap();
    let (pj, pc) = (dir.path().join("e.json"), dir.path().join("e.csv"));
    export(&r, Format::Json, &pj).unwrap();
    export(&r, Format::Csv, &pc).unwrap();
    assert_eq!(import_json(&pj).unwrap(), r);
    assert!(import_records_csv(&pc).unwrap().is_empty());
    assert_eq!(r.failure_rate(), 0.0);
    assert!(!r.is_degraded());
}

#[test]
fn every_experiment_validates_against_the_schema() {
    let opts = RunOptions { threads: 0, timings: true };
    validate(&threeview::run(&small_threeview(0), &opts).unwrap());
    validate(&bounds::run_ellipse(&bounds::EllipseConfig { grid: 21, extent: 4.0 }, &opts).unwrap());
    let k = bounds::KappaConfig { sizes: vec![50], ..Default::default() };
    validate(&bounds::run_kappa(&k, &opts).unwrap());
    validate(&vp::run(&vp::VpConfig { n_samples: 100, n_pencils: 5, ..Default::default() }, &opts).unwrap());
    let rp = relpose::RelPoseConfig { n_trials: 5, ..Default::default() };
    validate(&relpose::run(&rp, &opts).unwrap());
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let cfg = small_threeview(11);
    let a = threeview::run(&cfg, &RunOptions { threads: 1, timings: false }).unwrap();
    let b = threeview::run(&cfg, &RunOptions { threads: 4, timings: false }).unwrap();
    assert_eq!(a.to_json_string(), b.to_json_string());
    let v = vp::VpConfig { n_samples: 200, n_pencils: 8, ..Default::default() };
    let a = vp::run(&v, &RunOptions { threads: 1, timings: false }).unwrap();
    let b = vp::run(&v, &RunOptions { threads: 3, timings: false }).unwrap();
    assert_eq!(a.to_json_string(), b.to_json_string());
}

#[test]
fn timings_are_opt_in() {
    let cfg = small_threeview(1);
    let plain = threeview::run(&cfg, &RunOptions::default()).unwrap();
    assert!(plain.timings_ms.is_none());
    assert!(!plain.to_json_string().contains("timings_ms"));
    let timed = threeview::run(&cfg, &RunOptions { threads: 0, timings: true }).unwrap();
    assert_eq!(timed.timings_ms.as_ref().unwrap().len(), cfg.sigmas.len());
    assert_eq!(timed.records, plain.records);
}

#[test]
fn zero_noise_gives_perfect_auc_for_every_variant() {
    let mut cfg = small_threeview(5);
    cfg.sigmas = vec![0.0];
    let r = threeview::run(&cfg, &RunOptions::default()).unwrap();
    for v in threeview::VARIANTS {
        let a = r.aggregate("sigma=0", &format!("auc_{v}")).unwrap();
        assert!(a > 1.0 - 1e-9, "{v}: {a}");
    }
}

#[test]
fn zero_noise_kappa_certifies_everything() {
    let k = bounds::KappaConfig { noises: vec![0.0], sizes: vec![200], ..Default::default() };
    let r = bounds::run_kappa(&k, &RunOptions::default()).unwrap();
    assert_eq!(r.aggregate("sigma=0", "pct_certified").unwrap(), 100.0);
    assert_eq!(r.aggregate("sigma=0", "literal_violations").unwrap(), 0.0);
    assert_eq!(r.aggregate("sigma=0", "sqrt_violations").unwrap(), 0.0);
}

#[test]
fn ellipse_grid_ratio_is_capped_in_the_region() {
    let r = bounds::run_ellipse(&bounds::EllipseConfig::default(), &RunOptions::default()).unwrap();
    assert_eq!(r.aggregate("grid", "prop2_ratio_violations").unwrap(), 0.0);
    assert_eq!(r.aggregate("grid", "relaxed_outside_prop2").unwrap(), 0.0);
    assert!(r.aggregate("grid", "max_ratio_prop2").unwrap() <= 2.0 + bounds::RATIO_SLACK);
}

#[test]
fn curvature_ratio_ranks_the_sampson_gap() {
    let cfg = twoview::TwoViewConfig {
        scene: SceneConfig { n_samples: 2000, n_cameras: 2, ..SceneConfig::default() },
        sigmas: vec![1.0],
    };
    let r = twoview::run(&cfg, &RunOptions::default()).unwrap();
    let s = r.aggregate("sigma=1", "spearman_curvature_gap").unwrap();
    assert!(s > 0.5, "spearman {s}");
}
