//! Monte Carlo experiments: signals, seeded noise, risk and regret
//! estimation, rate fits and report files.

pub mod approx;
pub mod config;
pub mod estimator;
pub mod experiment;
pub mod report;
pub mod risk;
pub mod rng;
pub mod signal;

pub use approx::{class_approximation, ClassApprox};
pub use config::{AdversarialConfig, ExperimentConfig, DEFAULT_REPLICATES};
pub use estimator::{Estimator, EstimatorSpec, QaggParams, TvRuleName};
pub use experiment::{execute, oracle_value, run_experiment, run_experiment_from_file};
pub use report::{RiskReport, RiskRow, RowKind, CSV_HEADER, SCHEMA_VERSION};
pub use risk::{empirical_regret, fit_rate, mean_stderr, monte_carlo_risk, RateFit, Regret, RiskEstimate};
pub use rng::{gaussian_noise, replicate_rng};
pub use signal::{generate_signal, SignalSpec};
