use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::seq::{scaled_dist_sq, Sequence, ShapeClass};

use super::approx::{class_approximation, ClassApprox};
use super::estimator::Estimator;
use super::rng::gaussian_noise;

#[derive(Clone, Debug, Serialize)]
pub struct ReplicateFailure {
    pub replicate: u64,
    pub message: String,
}

/// Replicate-level losses `‖μ̂(y) - μ‖²` of one estimator.
#[derive(Clone, Debug, Serialize)]
pub struct RiskEstimate {
    pub mean: f64,
    pub stderr: f64,
    /// Losses of the replicates that succeeded, in replicate order.
    pub values: Vec<f64>,
    /// Replicate indices aligned with `values`.
    #[serde(skip)]
    pub replicates: Vec<u64>,
    pub failures: Vec<ReplicateFailure>,
    /// Summed wall time of the estimator calls.
    #[serde(skip)]
    pub elapsed_ms: f64,
}

/// Sample mean and standard error (`sd/√m`, `sd` with `m - 1` divisor).
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let m = values.len();
    if m == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / m as f64;
    if m < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (m - 1) as f64 / m as f64).sqrt())
}

/// Runs every estimator on the same noise draws (common random numbers).
/// Replicates run in the current rayon pool; results come back in replicate
/// order, so the summaries do not depend on the number of workers.
pub fn replicate_losses(
    estimators: &[&dyn Estimator],
    mu: &Sequence,
    sigma: f64,
    replicates: usize,
    master_seed: u64,
) -> Result<Vec<RiskEstimate>> {
    if replicates == 0 {
        return domain("need at least one replicate");
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return domain(format!("sigma must be positive, got {sigma}"));
    }
    let n = mu.len();
    let per_rep: Vec<Vec<(std::result::Result<f64, String>, f64)>> = (0..replicates as u64)
        .into_par_iter()
        .map(|r| {
            let xi = gaussian_noise(master_seed, n, r, sigma);
            let y = Sequence::from_vec_unchecked(mu.iter().zip(&xi).map(|(m, e)| m + e).collect());
            estimators
                .iter()
                .map(|est| {
                    let t = Instant::now();
                    let out = est.estimate(&y);
                    let ms = t.elapsed().as_secs_f64() * 1e3;
                    let loss = match out {
                        Ok(u) if u.len() == n && u.iter().all(|v| v.is_finite()) => Ok(scaled_dist_sq(&u, mu)),
                        Ok(_) => Err("estimate has wrong length or non-finite entries".to_string()),
                        Err(e) => Err(e.to_string()),
                    };
                    (loss, ms)
                })
                .collect()
        })
        .collect();

    let mut out = Vec::with_capacity(estimators.len());
    for e in 0..estimators.len() {
        let mut values = Vec::with_capacity(replicates);
        let mut reps = Vec::with_capacity(replicates);
        let mut failures = Vec::new();
        let mut elapsed_ms = 0.0;
        for (r, row) in per_rep.iter().enumerate() {
            let (loss, ms) = &row[e];
            elapsed_ms += ms;
            match loss {
                Ok(v) => {
                    values.push(*v);
                    reps.push(r as u64);
                }
                Err(msg) => failures.push(ReplicateFailure {
                    replicate: r as u64,
                    message: msg.clone(),
                }),
            }
        }
        if !failures.is_empty() {
            if failures.len() * 100 >= replicates {
                return Err(Error::ReplicateFailures {
                    failed: failures.len(),
                    total: replicates,
                    first: failures[0].message.clone(),
                });
            }
            log::warn!(
                "{} of {replicates} replicates failed and were excluded: {}",
                failures.len(),
                failures[0].message
            );
        }
        let (mean, stderr) = mean_stderr(&values);
        out.push(RiskEstimate {
            mean,
            stderr,
            values,
            replicates: reps,
            failures,
            elapsed_ms,
        });
    }
    Ok(out)
}

/// Monte Carlo estimate of `E‖μ̂(y) - μ‖²` with `y = μ + σ ξ`.
pub fn monte_carlo_risk(
    estimator: &dyn Estimator,
    mu: &Sequence,
    sigma: f64,
    replicates: usize,
    master_seed: u64,
) -> Result<RiskEstimate> {
    Ok(replicate_losses(&[estimator], mu, sigma, replicates, master_seed)?
        .pop()
        .expect("one estimator"))
}

#[derive(Clone, Debug, Serialize)]
pub struct Regret {
    /// `E‖μ̂ - μ‖ - min_{u∈S} ‖u - μ‖`.
    pub r1: f64,
    pub r1_stderr: f64,
    /// `E‖μ̂ - μ‖² - min_{u∈S} ‖u - μ‖²`.
    pub r2: f64,
    pub r2_stderr: f64,
    pub approx_sq: f64,
    /// False when the class minimum was only bounded from above, in which
    /// case both regrets are lower bounds.
    pub approx_exact: bool,
}

pub fn regret_from(risk: &RiskEstimate, approx: &ClassApprox) -> Regret {
    let roots: Vec<f64> = risk.values.iter().map(|v| v.sqrt()).collect();
    let (mean_root, root_se) = mean_stderr(&roots);
    Regret {
        r1: mean_root - approx.dist_sq.sqrt(),
        r1_stderr: root_se,
        r2: risk.mean - approx.dist_sq,
        r2_stderr: risk.stderr,
        approx_sq: approx.dist_sq,
        approx_exact: approx.exact,
    }
}

pub fn empirical_regret(
    estimator: &dyn Estimator,
    mu: &Sequence,
    class: &ShapeClass,
    sigma: f64,
    replicates: usize,
    seed: u64,
) -> Result<Regret> {
    let approx = class_approximation(mu, class)?;
    let risk = monte_carlo_risk(estimator, mu, sigma, replicates, seed)?;
    Ok(regret_from(&risk, &approx))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub slope_stderr: f64,
    /// 95% t-interval for the slope. Degenerate when the fit is exact.
    pub ci95: (f64, f64),
}

/// Two-sided 97.5% quantiles of Student's t for 1..=30 degrees of freedom.
const T975: [f64; 30] = [
    12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228, 2.201, 2.179, 2.160, 2.145, 2.131, 2.120,
    2.110, 2.101, 2.093, 2.086, 2.080, 2.074, 2.069, 2.064, 2.060, 2.056, 2.052, 2.048, 2.045, 2.042,
];

/// Least squares on `(log n, log risk)`.
pub fn fit_rate(points: &[(f64, f64)]) -> Result<RateFit> {
    if points.len() < 3 {
        return domain("rate fit needs at least 3 points");
    }
    if points.windows(2).any(|w| !(w[1].0 > w[0].0)) || points[0].0 <= 0.0 {
        return domain("rate fit needs positive, strictly increasing n");
    }
    if let Some(p) = points.iter().find(|p| !(p.1 > 0.0 && p.1.is_finite())) {
        return domain(format!("rate fit needs positive risks, got {}", p.1));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let m = xs.len() as f64;
    let xbar = xs.iter().sum::<f64>() / m;
    let ybar = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - xbar) * (x - xbar)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xbar) * (y - ybar)).sum();
    let syy: f64 = ys.iter().map(|y| (y - ybar) * (y - ybar)).sum();
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    let sse: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let r = y - intercept - slope * x;
            r * r
        })
        .sum();
    let r_squared = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    let df = xs.len() - 2;
    let slope_stderr = (sse / df as f64 / sxx).sqrt();
    let t = if df <= 30 { T975[df - 1] } else { 1.96 };
    Ok(RateFit {
        slope,
        intercept,
        r_squared,
        slope_stderr,
        ci95: (slope - t * slope_stderr, slope + t * slope_stderr),
    })
}
