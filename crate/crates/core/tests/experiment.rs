use std::path::PathBuf;

use spagg::harness::{
    empirical_regret, generate_signal, monte_carlo_risk, run_experiment, EstimatorSpec, ExperimentConfig, QaggParams,
    RowKind, SignalSpec, CSV_HEADER,
};
use spagg::ShapeClass;

fn shipped(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
}

const MINIMAL: &str = r#"
name = "minimal"
n_grid = [16]
replicates = 30
master_seed = 5

[signal]
family = "staircase"
k = 2
v = 1.0

[[estimators]]
method = "pava"
"#;

#[test]
fn minimal_config_writes_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::from_toml_str(MINIMAL).unwrap();
    cfg.output_dir = dir.path().to_path_buf();
    let report = run_experiment(&cfg, 1).unwrap();
    assert!(report.is_success());
    assert_eq!(report.rows.len(), 1);
    assert!(report.rows[0].stderr.is_some());

    let csv = std::fs::read_to_string(dir.path().join("risk.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some(CSV_HEADER));
    assert!(lines.next().unwrap().starts_with("pava,16,1,30,"));
    assert!(lines.next().is_none());

    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(json["schema_version"], 1);
    assert!(dir.path().join("risk.svg").exists());
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let base = ExperimentConfig::from_toml_str(MINIMAL).unwrap();
    let mut files = Vec::new();
    for (i, workers) in [1usize, 3].into_iter().enumerate() {
        let mut cfg = base.clone();
        cfg.output_dir = dir.path().join(i.to_string());
        run_experiment(&cfg, workers).unwrap();
        files.push((
            std::fs::read(cfg.output_dir.join("risk.csv")).unwrap(),
            std::fs::read(cfg.output_dir.join("report.json")).unwrap(),
        ));
    }
    assert_eq!(files[0], files[1]);
}

#[test]
fn shipped_configs_are_valid() {
    let dir = std::fs::read_dir(shipped("")).unwrap();
    let mut count = 0;
    for entry in dir {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            count += 1;
        }
    }
    assert!(count >= 4);
}

#[test]
fn adversarial_rows_carry_their_label() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::load(&shipped("determinism.toml")).unwrap();
    cfg.n_grid = vec![8];
    cfg.replicates = 30;
    cfg.output_dir = dir.path().to_path_buf();
    let report = run_experiment(&cfg, 2).unwrap();
    assert!(report.is_success(), "{:?}", report.errors);
    let adv: Vec<_> = report
        .rows
        .iter()
        .filter(|r| r.kind == RowKind::AdversarialMax)
        .collect();
    assert_eq!(adv.len(), cfg.estimators.len());
    let csv = std::fs::read_to_string(dir.path().join("risk.csv")).unwrap();
    assert!(csv.contains("[adversarial-grid max]"));
}

#[test]
fn identity_stderr_matches_chi_square_variance() {
    let (n, reps, sigma) = (100, 4000, 1.5);
    let mu = generate_signal(&SignalSpec::Constant { c: 0.0 }, n).unwrap();
    let est = EstimatorSpec::Identity.prepare(&mu, sigma).unwrap();
    let r = monte_carlo_risk(est.as_ref(), &mu, sigma, reps, 17).unwrap();
    let exact = sigma * sigma * (2.0 / (n * reps) as f64).sqrt();
    assert!((r.stderr / exact - 1.0).abs() < 0.2, "{} vs {exact}", r.stderr);
    assert!((r.mean - sigma * sigma).abs() <= 4.0 * r.stderr);
}

#[test]
fn projection_risk_is_dimension_over_n() {
    let n = 100;
    let mu = generate_signal(&SignalSpec::Staircase { k: 4, v: 2.0 }, n).unwrap();
    let est = EstimatorSpec::Projection {
        family: spagg::PatternFamily::Monotone,
        pattern: vec![25, 50, 75],
    }
    .prepare(&mu, 1.0)
    .unwrap();
    let r = monte_carlo_risk(est.as_ref(), &mu, 1.0, 10_000, 3).unwrap();
    assert!((r.mean - 0.04).abs() <= 4.0 * r.stderr, "{} ± {}", r.mean, r.stderr);
}

#[test]
fn regret_is_not_significantly_negative() {
    let n = 16;
    let cases = [
        (
            SignalSpec::Staircase { k: 2, v: 1.0 },
            ShapeClass::MonotoneKPieces { k: 2 },
        ),
        (SignalSpec::Linear { v: 1.0 }, ShapeClass::MonotoneBoundedV { v: 1.0 }),
        (SignalSpec::SqrtRamp { v: 1.0 }, ShapeClass::Monotone),
    ];
    for (signal, class) in cases {
        let mu = generate_signal(&signal, n).unwrap();
        for spec in [
            EstimatorSpec::Pava,
            EstimatorSpec::Qagg(QaggParams::default()),
            EstimatorSpec::GrandMean,
        ] {
            let est = spec.prepare(&mu, 1.0).unwrap();
            let reg = empirical_regret(est.as_ref(), &mu, &class, 1.0, 200, 9).unwrap();
            assert!(
                reg.r2 >= -2.0 * reg.r2_stderr,
                "{} on {}: {reg:?}",
                spec.label(),
                signal.label()
            );
        }
    }
}

#[test]
fn signals_do_not_depend_on_random_state() {
    let spec = SignalSpec::ConvexKinks { q: 3, v: 2.0 };
    let a = generate_signal(&spec, 40).unwrap();
    let mu = generate_signal(&SignalSpec::Constant { c: 0.0 }, 40).unwrap();
    let est = EstimatorSpec::Identity.prepare(&mu, 1.0).unwrap();
    monte_carlo_risk(est.as_ref(), &mu, 1.0, 50, 1).unwrap();
    assert_eq!(a, generate_signal(&spec, 40).unwrap());
}

#[test]
fn zero_risk_series_skip_the_rate_fit() {
    let mut cfg = ExperimentConfig::new(
        SignalSpec::Staircase { k: 2, v: 1.0 },
        vec![8, 12, 16],
        vec![EstimatorSpec::ClassOracle {
            class: ShapeClass::MonotoneKPieces { k: 2 },
        }],
    );
    cfg.replicates = 30;
    let report = spagg::harness::execute(&cfg, 1).unwrap();
    assert!(report.is_success(), "{:?}", report.errors);
    assert!(report.rate_fits.is_empty());
    assert!(report.notes.iter().any(|n| n.contains("no rate fit")));
}
