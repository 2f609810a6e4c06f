use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::lower::{convex_hypotheses, corollary_k_choice, monotone_hypotheses};
use crate::oracle::{oracle_rhs_convex, oracle_rhs_monotone, BoundSpec, ConvexSearch, CONVEX_EXHAUSTIVE_MAX_N};
use crate::seq::{scaled_dot, scaled_norm_sq, total_variation_v, PatternFamily, Sequence, ShapeClass};

use super::approx::class_approximation;
use super::config::{AdversarialConfig, ExperimentConfig};
use super::report::{write_outputs, RateFitRow, RiskReport, RiskRow, RowKind, SCHEMA_VERSION};
use super::risk::{fit_rate, monte_carlo_risk, regret_from};
use super::signal::generate_signal;

/// Cap on the greedy convex oracle search for long sequences.
const GREEDY_MAX_KNOTS: usize = 16;

/// Right-hand side of an oracle inequality for `mu`.
pub fn oracle_value(mu: &Sequence, sigma: f64, spec: &BoundSpec) -> Result<f64> {
    match spec.family {
        PatternFamily::Monotone => oracle_rhs_monotone(mu, sigma, spec),
        PatternFamily::Convex => {
            let n = mu.len();
            let search = if n <= CONVEX_EXHAUSTIVE_MAX_N {
                ConvexSearch::Exhaustive
            } else {
                ConvexSearch::Greedy {
                    max_knots: GREEDY_MAX_KNOTS.min(n.saturating_sub(2)),
                }
            };
            Ok(oracle_rhs_convex(mu, sigma, spec, search)?.value)
        }
    }
}

/// Runs the grid in a pool of `workers` threads (0 picks the rayon default).
/// Cell-level failures are collected in `RiskReport::errors`.
pub fn execute(cfg: &ExperimentConfig, workers: usize) -> Result<RiskReport> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    pool.install(|| execute_in_pool(cfg))
}

/// `execute` followed by writing `risk.csv`, `report.json` and (optionally)
/// `risk.svg` into `cfg.output_dir`.
pub fn run_experiment(cfg: &ExperimentConfig, workers: usize) -> Result<RiskReport> {
    let report = execute(cfg, workers)?;
    write_outputs(&report, &cfg.output_dir, cfg.plot)?;
    Ok(report)
}

pub fn run_experiment_from_file(path: &Path, workers: usize) -> Result<RiskReport> {
    run_experiment(&ExperimentConfig::load(path)?, workers)
}

fn execute_in_pool(cfg: &ExperimentConfig) -> Result<RiskReport> {
    let mut rows = Vec::new();
    let mut errors = Vec::new();
    let mut notes = Vec::new();
    let publish_se = cfg.publishes_stderr();
    if !publish_se {
        notes.push(format!(
            "fewer than {} replicates: standard errors are omitted",
            super::config::MIN_REPLICATES_FOR_STDERR
        ));
    }

    for &n in &cfg.n_grid {
        let mu = generate_signal(&cfg.signal, n)?;
        let approx = match &cfg.class {
            Some(c) => match class_approximation(&mu, c) {
                Ok(a) => {
                    if !a.exact {
                        notes.push(format!(
                            "n = {n}: the class approximation term is an upper bound, regrets are lower bounds"
                        ));
                    }
                    Some(a)
                }
                Err(e) => {
                    errors.push(format!("n = {n}: class approximation: {e}"));
                    None
                }
            },
            None => None,
        };
        let oracle_rhs: Vec<Option<f64>> = cfg
            .oracle_spec
            .iter()
            .map(|s| match oracle_value(&mu, cfg.sigma, s) {
                Ok(v) => Some(v),
                Err(e) => {
                    errors.push(format!("n = {n}: oracle {s:?}: {e}"));
                    None
                }
            })
            .collect();

        for spec in &cfg.estimators {
            let label = spec.label();
            let risk = spec
                .prepare(&mu, cfg.sigma)
                .and_then(|est| monte_carlo_risk(est.as_ref(), &mu, cfg.sigma, cfg.replicates, cfg.master_seed));
            let risk = match risk {
                Ok(r) => r,
                Err(e) => {
                    errors.push(format!("{label}, n = {n}: {e}"));
                    continue;
                }
            };
            for f in &risk.failures {
                errors.push(format!(
                    "{label}, n = {n}, replicate {}: {} (excluded)",
                    f.replicate, f.message
                ));
            }
            let regret = approx.as_ref().map(|a| regret_from(&risk, a));
            rows.push(RiskRow {
                estimator: label,
                kind: RowKind::Mean,
                n,
                sigma: cfg.sigma,
                replicates: risk.values.len(),
                mean_risk: risk.mean,
                stderr: publish_se.then_some(risk.stderr),
                regret_r1: regret.as_ref().map(|r| r.r1),
                regret_r2: regret.as_ref().map(|r| r.r2),
                regret_r1_stderr: regret.as_ref().filter(|_| publish_se).map(|r| r.r1_stderr),
                approx_sq: regret.as_ref().map(|r| r.approx_sq),
                regret_is_lower_bound: regret.as_ref().map(|r| !r.approx_exact),
                oracle_rhs: oracle_rhs.clone(),
                runtime_ms: cfg.record_runtime.then_some(risk.elapsed_ms),
                seed: cfg.master_seed,
                failures: risk.failures.len(),
                worst_case: None,
            });
        }

        if let (Some(adv), Some(class)) = (&cfg.adversarial, &cfg.class) {
            match adversarial_candidates(&mu, class, cfg.sigma, adv) {
                Ok((cands, warn)) => {
                    if let Some(w) = warn {
                        errors.push(format!("n = {n}: {w}"));
                    }
                    for spec in &cfg.estimators {
                        match adversarial_row(cfg, spec, class, &cands, &oracle_rhs, publish_se) {
                            Ok(row) => rows.push(row),
                            Err(e) => errors.push(format!("{} adversarial grid, n = {n}: {e}", spec.label())),
                        }
                    }
                }
                Err(e) => errors.push(format!("n = {n}: adversarial grid: {e}")),
            }
        }
    }

    if cfg.adversarial.is_some() {
        notes.push("adversarial-grid max rows are lower bounds on the maximal regret over all mean vectors".into());
    }

    let mut rate_fits = Vec::new();
    for spec in &cfg.estimators {
        let label = spec.label();
        let pts: Vec<(f64, f64)> = rows
            .iter()
            .filter(|r| r.kind == RowKind::Mean && r.estimator == label)
            .map(|r| (r.n as f64, r.mean_risk))
            .collect();
        if pts.len() < 3 {
            continue;
        }
        if pts.iter().any(|p| p.1 <= 0.0) {
            notes.push(format!("{label}: no rate fit, some risks are zero"));
            continue;
        }
        match fit_rate(&pts) {
            Ok(fit) => rate_fits.push(RateFitRow { estimator: label, fit }),
            Err(e) => errors.push(format!("{label}: rate fit: {e}")),
        }
    }
    notes.dedup();

    Ok(RiskReport {
        schema_version: SCHEMA_VERSION,
        name: cfg.name.clone(),
        signal: cfg.signal.label(),
        class: cfg.class,
        config: cfg.clone(),
        rows,
        rate_fits,
        notes,
        errors,
    })
}

type Candidates = Vec<(String, Sequence)>;

/// Builds the finite adversarial grid around `mu`. Returns an optional
/// warning when the packing part could not be constructed.
fn adversarial_candidates(
    mu: &Sequence,
    class: &ShapeClass,
    sigma: f64,
    adv: &AdversarialConfig,
) -> Result<(Candidates, Option<String>)> {
    let n = mu.len();
    let mut out: Candidates = vec![("signal".into(), mu.clone())];
    let mut rng = ChaCha8Rng::seed_from_u64(adv.seed ^ (n as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let ones = vec![1.0; n];
    for j in 0..adv.perturbations {
        let mut w: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        // Orthogonal to constants and to the signal.
        let mut basis = vec![ones.clone()];
        let mu_c: Vec<f64> = {
            let m = mu.mean();
            mu.iter().map(|v| v - m).collect()
        };
        if scaled_norm_sq(&mu_c) > 0.0 {
            basis.push(mu_c);
        }
        for b in &basis {
            let c = scaled_dot(&w, b) / scaled_norm_sq(b);
            w.iter_mut().zip(b).for_each(|(x, bi)| *x -= c * bi);
        }
        let norm = scaled_norm_sq(&w).sqrt();
        if norm == 0.0 {
            continue;
        }
        let s = adv.perturbation_scale * sigma / norm;
        let cand: Vec<f64> = mu.iter().zip(&w).map(|(m, x)| m + s * x).collect();
        out.push((format!("perturbation {j}"), Sequence::new(cand)?));
    }
    let mut warning = None;
    if adv.packing_hypotheses > 0 {
        let packing = match *class {
            ShapeClass::Convex | ShapeClass::ConvexQPieces { .. } => {
                let q = match *class {
                    ShapeClass::ConvexQPieces { q } => q.max(2),
                    _ => 2,
                };
                convex_hypotheses(n, q, sigma, adv.seed)
            }
            _ => {
                let v = match *class {
                    ShapeClass::MonotoneBoundedV { v } => v,
                    _ => total_variation_v(mu).max(sigma),
                };
                let k = match *class {
                    ShapeClass::MonotoneKPieces { k } => Ok(k),
                    _ => corollary_k_choice(v, sigma, n).map(|(k, _)| k),
                };
                k.and_then(|k| monotone_hypotheses(n, k, v, sigma, adv.seed))
            }
        };
        match packing {
            Ok(rep) => {
                for (i, h) in rep.hypotheses.into_iter().take(adv.packing_hypotheses).enumerate() {
                    out.push((format!("packing hypothesis {i}"), h));
                }
            }
            Err(e) => warning = Some(format!("packing hypotheses skipped: {e}")),
        }
    }
    Ok((out, warning))
}

fn adversarial_row(
    cfg: &ExperimentConfig,
    spec: &super::estimator::EstimatorSpec,
    class: &ShapeClass,
    cands: &Candidates,
    oracle_rhs: &[Option<f64>],
    publish_se: bool,
) -> Result<RiskRow> {
    let mut best: Option<(String, super::risk::RiskEstimate, super::risk::Regret)> = None;
    for (name, cand) in cands {
        let est = spec.prepare(cand, cfg.sigma)?;
        let risk = monte_carlo_risk(est.as_ref(), cand, cfg.sigma, cfg.replicates, cfg.master_seed)?;
        let approx = class_approximation(cand, class)?;
        let regret = regret_from(&risk, &approx);
        if best.as_ref().is_none_or(|b| regret.r2 > b.2.r2) {
            best = Some((name.clone(), risk, regret));
        }
    }
    let (name, risk, regret) = best.expect("the signal is always a candidate");
    Ok(RiskRow {
        estimator: spec.label(),
        kind: RowKind::AdversarialMax,
        n: cands[0].1.len(),
        sigma: cfg.sigma,
        replicates: risk.values.len(),
        mean_risk: risk.mean,
        stderr: publish_se.then_some(risk.stderr),
        regret_r1: Some(regret.r1),
        regret_r2: Some(regret.r2),
        regret_r1_stderr: publish_se.then_some(regret.r1_stderr),
        approx_sq: Some(regret.approx_sq),
        regret_is_lower_bound: Some(true),
        oracle_rhs: oracle_rhs.to_vec(),
        runtime_ms: cfg.record_runtime.then_some(risk.elapsed_ms),
        seed: cfg.master_seed,
        failures: risk.failures.len(),
        worst_case: Some(name),
    })
}
