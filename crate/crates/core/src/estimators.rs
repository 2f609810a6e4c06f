//! Least-squares estimators over the monotone and convex cones, the
//! total-variation penalised estimator and a difference-based noise estimate.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::projection::ConvexProjector;
use crate::seq::{Pattern, Sequence};

/// Projection onto non-decreasing sequences by pool-adjacent-violators.
pub fn isotonic_ls(y: &[f64]) -> Vec<f64> {
    // blocks of (sum, count); a block's level is sum / count
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(y.len());
    for &v in y {
        let mut cur = (v, 1usize);
        while let Some(&(s, c)) = blocks.last() {
            if s / c as f64 > cur.0 / cur.1 as f64 {
                cur = (cur.0 + s, cur.1 + c);
                blocks.pop();
            } else {
                break;
            }
        }
        blocks.push(cur);
    }
    let mut out = Vec::with_capacity(y.len());
    for (s, c) in blocks {
        out.extend(std::iter::repeat_n(s / c as f64, c));
    }
    out
}

pub const CONVEX_LS_MAX_ITER: usize = 100_000;
pub const CONVEX_LS_TOL: f64 = 1e-9;

/// Projection onto convex sequences.
///
/// The cone is `{a + b·i + Σ_k c_k h^k : c_k ≥ 0}` with hinges
/// `h^k_j = max(j - k, 0)` for interior `k`. Lawson–Hanson active-set NNLS on
/// the hinge coefficients; each passive-set solve is a projection onto `W_P`.
/// Stops when every dual value `⟨y - x, h^k⟩` is below `tol·‖y‖·‖h^k‖`.
pub fn convex_ls(y: &[f64], tol: f64) -> Result<Vec<f64>> {
    let n = y.len();
    if n < 3 {
        return domain(format!("convex least squares needs n >= 3, got {n}"));
    }
    if tol.is_nan() || tol <= 0.0 {
        return domain("tolerance must be positive");
    }
    let y_norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    // ‖h^k‖ for 1-based k: sqrt(Σ_{d=1}^{n-k} d²)
    let hinge_norm = |k: usize| {
        let m = (n - k) as f64;
        (m * (m + 1.0) * (2.0 * m + 1.0) / 6.0).sqrt()
    };

    let mut passive: Vec<usize> = Vec::new();
    let mut x = project_on(y, &passive)?;
    let mut iterations = 0usize;
    loop {
        let dual = hinge_duals(y, &x);
        let mut best: Option<(usize, f64)> = None;
        let mut worst_violation: f64 = 0.0;
        for k in 2..n {
            if passive.binary_search(&k).is_ok() {
                continue;
            }
            let scaled = dual[k] / hinge_norm(k);
            let viol = scaled - tol * y_norm;
            if viol > 0.0 {
                worst_violation = worst_violation.max(viol);
                if best.is_none_or(|(_, b)| scaled > b) {
                    best = Some((k, scaled));
                }
            }
        }
        let Some((k, _)) = best else {
            return Ok(x);
        };
        let pos = passive.binary_search(&k).unwrap_err();
        passive.insert(pos, k);

        loop {
            iterations += 1;
            if iterations > CONVEX_LS_MAX_ITER {
                return Err(Error::Convergence {
                    iterations: CONVEX_LS_MAX_ITER,
                    residual: worst_violation,
                });
            }
            let z = project_on(y, &passive)?;
            let cz: Vec<f64> = passive.iter().map(|&k| second_diff(&z, k)).collect();
            if cz.iter().all(|&c| c > 0.0) {
                x = z;
                break;
            }
            let cx: Vec<f64> = passive.iter().map(|&k| second_diff(&x, k)).collect();
            let mut alpha = 1.0f64;
            for (&a, &b) in cx.iter().zip(&cz) {
                if b <= 0.0 {
                    let denom = a - b;
                    let t = if denom > 0.0 { a / denom } else { 0.0 };
                    alpha = alpha.min(t.max(0.0));
                }
            }
            for (xi, zi) in x.iter_mut().zip(&z) {
                *xi += alpha * (zi - *xi);
            }
            let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
            passive.retain(|&k| second_diff(&x, k) > 1e-14 * scale);
            if passive.is_empty() {
                x = project_on(y, &passive)?;
                break;
            }
        }
    }
}

fn second_diff(x: &[f64], k: usize) -> f64 {
    // 1-based k; x_{k-1} - 2 x_k + x_{k+1}
    x[k - 2] - 2.0 * x[k - 1] + x[k]
}

fn project_on(y: &[f64], knots: &[usize]) -> Result<Vec<f64>> {
    let pattern = Pattern::convex(y.len(), knots.to_vec())?;
    Ok(ConvexProjector::new(y.len(), &pattern)?.project(y))
}

/// `w_k = Σ_{j>k} (j - k)(y_j - x_j)` for every 1-based `k`, via suffix sums.
fn hinge_duals(y: &[f64], x: &[f64]) -> Vec<f64> {
    let n = y.len();
    let mut w = vec![0.0; n + 1];
    let (mut s1, mut s2) = (0.0, 0.0);
    for k in (1..=n).rev() {
        w[k] = s2 - k as f64 * s1;
        let r = y[k - 1] - x[k - 1];
        s1 += r;
        s2 += k as f64 * r;
    }
    w
}

/// How the TV penalty level is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum LambdaRule {
    Explicit {
        lambda: f64,
    },
    /// `σ √(log(n/δ)/(k* n))` with the real-valued `k* = (V² n log(n/δ)/σ²)^{1/3}`.
    AdaptiveKStar {
        v: f64,
        sigma: f64,
        delta: f64,
    },
    /// `2σ √((2/n) log(n/δ))`.
    Universal {
        sigma: f64,
        delta: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TVTuning {
    pub rule: LambdaRule,
}

impl TVTuning {
    pub fn explicit(lambda: f64) -> Self {
        Self {
            rule: LambdaRule::Explicit { lambda },
        }
    }

    /// The penalty level for a sequence of length `n`.
    pub fn lambda(&self, n: usize) -> Result<f64> {
        let lambda = match self.rule {
            LambdaRule::Explicit { lambda } => lambda,
            LambdaRule::AdaptiveKStar { v, sigma, delta } => lambda_adaptive_kstar(v, sigma, n, delta)?,
            LambdaRule::Universal { sigma, delta } => lambda_universal(sigma, n, delta)?,
        };
        if !(lambda > 0.0 && lambda.is_finite()) {
            return domain(format!("lambda must be positive and finite, got {lambda}"));
        }
        Ok(lambda)
    }
}

fn check_delta_sigma(sigma: f64, n: usize, delta: f64) -> Result<f64> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return domain(format!("sigma must be positive, got {sigma}"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return domain(format!("delta must lie in (0, 1), got {delta}"));
    }
    if n == 0 {
        return domain("n must be positive");
    }
    let l = (n as f64 / delta).ln();
    if l <= 0.0 {
        return domain("log(n/delta) must be positive");
    }
    Ok(l)
}

pub fn lambda_adaptive_kstar(v: f64, sigma: f64, n: usize, delta: f64) -> Result<f64> {
    let l = check_delta_sigma(sigma, n, delta)?;
    if !(v > 0.0 && v.is_finite()) {
        return domain(format!("V must be positive, got {v}"));
    }
    let nf = n as f64;
    let k = (v * v * nf * l / (sigma * sigma)).cbrt();
    Ok(sigma * (l / (k * nf)).sqrt())
}

pub fn lambda_universal(sigma: f64, n: usize, delta: f64) -> Result<f64> {
    let l = check_delta_sigma(sigma, n, delta)?;
    Ok(2.0 * sigma * (2.0 / n as f64 * l).sqrt())
}

/// Minimiser of `½‖u - y‖² + λ Σ|u_{i+1} - u_i|` in the scaled norm.
pub fn tv_estimator(y: &[f64], tuning: &TVTuning) -> Result<Vec<f64>> {
    let lambda = tuning.lambda(y.len())?;
    Ok(tv_denoise(y, lambda * y.len() as f64))
}

/// Exact 1-D total-variation denoising of `½ Σ(u_i - y_i)² + penalty Σ|Δu|`
/// (unscaled form), by Condat's direct algorithm.
pub fn tv_denoise(y: &[f64], penalty: f64) -> Vec<f64> {
    let n = y.len();
    let mut out = vec![0.0; n];
    if n == 0 {
        return out;
    }
    let lam = penalty;
    let (mut k, mut k0, mut kplus, mut kminus) = (0usize, 0usize, 0usize, 0usize);
    let (mut umin, mut umax) = (lam, -lam);
    let (mut vmin, mut vmax) = (y[0] - lam, y[0] + lam);
    loop {
        while k == n - 1 {
            if umin < 0.0 {
                while k0 <= kminus {
                    out[k0] = vmin;
                    k0 += 1;
                }
                k = k0;
                kminus = k0;
                vmin = y[k0];
                umin = lam;
                umax = vmin + umin - vmax;
            } else if umax > 0.0 {
                while k0 <= kplus {
                    out[k0] = vmax;
                    k0 += 1;
                }
                k = k0;
                kplus = k0;
                vmax = y[k0];
                umax = -lam;
                umin = vmax + umax - vmin;
            } else {
                vmin += umin / (k - k0 + 1) as f64;
                while k0 <= k {
                    out[k0] = vmin;
                    k0 += 1;
                }
                return out;
            }
        }
        umin += y[k + 1] - vmin;
        if umin < -lam {
            while k0 <= kminus {
                out[k0] = vmin;
                k0 += 1;
            }
            k = k0;
            kminus = k0;
            kplus = k0;
            vmin = y[k0];
            vmax = vmin + 2.0 * lam;
            umin = lam;
            umax = -lam;
            continue;
        }
        umax += y[k + 1] - vmax;
        if umax > lam {
            while k0 <= kplus {
                out[k0] = vmax;
                k0 += 1;
            }
            k = k0;
            kminus = k0;
            kplus = k0;
            vmax = y[k0];
            vmin = vmax - 2.0 * lam;
            umin = lam;
            umax = -lam;
            continue;
        }
        k += 1;
        if umin >= lam {
            kminus = k;
            vmin += (umin - lam) / (kminus - k0 + 1) as f64;
            umin = lam;
        }
        if umax <= -lam {
            kplus = k;
            vmax += (umax + lam) / (kplus - k0 + 1) as f64;
            umax = -lam;
        }
    }
}

/// Largest violation of the TV optimality conditions for `u` (unscaled
/// penalty). The dual path `z_i = Σ_{j≤i}(y_j - u_j)` must stay in
/// `[-penalty, penalty]`, equal `-penalty·sign(u_{i+1} - u_i)` at jumps and
/// return to zero at the end.
pub fn tv_kkt_residual(y: &[f64], u: &[f64], penalty: f64) -> f64 {
    let n = y.len();
    let mut z = 0.0;
    let mut worst: f64 = 0.0;
    for i in 0..n {
        z += y[i] - u[i];
        if i + 1 == n {
            worst = worst.max(z.abs());
            break;
        }
        let d = u[i + 1] - u[i];
        let r = if d > 0.0 {
            (z + penalty).abs()
        } else if d < 0.0 {
            (z - penalty).abs()
        } else {
            (z.abs() - penalty).max(0.0)
        };
        worst = worst.max(r);
    }
    worst
}

/// Smallest distance between two consecutive jump positions, or `None` when
/// `u` has fewer than two jumps.
pub fn min_jump_spacing(u: &[f64]) -> Option<usize> {
    let mut prev: Option<usize> = None;
    let mut best: Option<usize> = None;
    for i in 0..u.len().saturating_sub(1) {
        if u[i] != u[i + 1] {
            if let Some(p) = prev {
                let d = i - p;
                best = Some(best.map_or(d, |b| b.min(d)));
            }
            prev = Some(i);
        }
    }
    best
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseSource {
    Known,
    EstimatedDiff,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseLevel {
    pub sigma: f64,
    pub source: NoiseSource,
}

impl NoiseLevel {
    pub fn known(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return domain(format!("sigma must be positive, got {sigma}"));
        }
        Ok(Self {
            sigma,
            source: NoiseSource::Known,
        })
    }
}

/// `σ̂² = Σ (y_{i+1} - y_i)² / (2(n - 1))`. Biased upward by
/// `Σ(Δμ)²/(2(n - 1))`; exactly zero on constant input.
pub fn estimate_sigma_diff(y: &Sequence) -> Result<NoiseLevel> {
    let n = y.len();
    if n < 2 {
        return domain("difference-based noise estimate needs n >= 2");
    }
    let ss: f64 = y.windows(2).map(|w| (w[1] - w[0]) * (w[1] - w[0])).sum();
    Ok(NoiseLevel {
        sigma: (ss / (2.0 * (n - 1) as f64)).sqrt(),
        source: NoiseSource::EstimatedDiff,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seq::is_convex;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn pava_examples() {
        assert_eq!(isotonic_ls(&[1.0, 2.0, 3.0]), vec![1.0, 2.0, 3.0]);
        assert_eq!(isotonic_ls(&[2.0, 1.0]), vec![1.5, 1.5]);
        assert_eq!(isotonic_ls(&[3.0, 1.0, 2.0]), vec![2.0, 2.0, 2.0]);
        assert_eq!(isotonic_ls(&[1.0, 3.0, 2.0, 4.0]), vec![1.0, 2.5, 2.5, 4.0]);
    }

    #[test]
    fn convex_ls_examples() {
        let r = convex_ls(&[0.0, 1.0, 2.0, 3.0], 1e-9).unwrap();
        assert!(close(&r, &[0.0, 1.0, 2.0, 3.0], 1e-12));
        let r = convex_ls(&[0.0, 1.0, 0.0], 1e-9).unwrap();
        assert!(close(&r, &[1.0 / 3.0; 3], 1e-12));
        let r = convex_ls(&[1.0, 0.0, 0.0, 1.0], 1e-9).unwrap();
        assert!(close(&r, &[1.0, 0.0, 0.0, 1.0], 1e-12));
        assert!(convex_ls(&[1.0, 2.0], 1e-9).is_err());
    }

    #[test]
    fn convex_ls_kkt_on_noisy_input() {
        let y: Vec<f64> = (0..40)
            .map(|i| {
                let t = i as f64 / 39.0;
                (t - 0.4) * (t - 0.4) + 0.05 * ((i * 7919 % 13) as f64 - 6.0)
            })
            .collect();
        let r = convex_ls(&y, 1e-10).unwrap();
        assert!(is_convex_tol(&r, 1e-12));
        let inner: f64 = y.iter().zip(&r).map(|(a, b)| (a - b) * b).sum();
        assert!(inner.abs() < 1e-8);
        let w = hinge_duals(&y, &r);
        assert!(w[2..40].iter().all(|&v| v < 1e-7));
    }

    fn is_convex_tol(u: &[f64], tol: f64) -> bool {
        is_convex(u) || u.windows(3).all(|w| w[0] + w[2] - 2.0 * w[1] >= -tol)
    }

    #[test]
    fn tv_examples() {
        let y = [0.0, 0.0, 4.0, 4.0];
        let r = tv_estimator(&y, &TVTuning::explicit(0.25)).unwrap();
        assert!(close(&r, &[0.5, 0.5, 3.5, 3.5], 1e-12));
        let r = tv_estimator(&y, &TVTuning::explicit(100.0)).unwrap();
        assert!(close(&r, &[2.0; 4], 1e-12));
        let r = tv_estimator(&[1.0, -2.0, 5.0], &TVTuning::explicit(1e-13)).unwrap();
        assert!(close(&r, &[1.0, -2.0, 5.0], 1e-9));
        assert_eq!(tv_denoise(&[3.0], 1.0), vec![3.0]);
    }

    #[test]
    fn tv_kkt_holds() {
        let y: Vec<f64> = (0..50)
            .map(|i| ((i * 37 % 11) as f64).sin() * 3.0 + (i / 10) as f64)
            .collect();
        for penalty in [0.01, 0.3, 1.0, 5.0, 40.0] {
            let u = tv_denoise(&y, penalty);
            assert!(tv_kkt_residual(&y, &u, penalty) < 1e-8, "penalty {penalty}");
        }
    }

    #[test]
    fn lambda_rules() {
        let l = lambda_adaptive_kstar(1.0, 1.0, 8, 0.125).unwrap();
        assert!((l - 0.402_036_588_539_368_1).abs() < 1e-12);
        assert!(lambda_adaptive_kstar(2.0, 1.0, 8, 0.125).unwrap() < l);
        let l2 = lambda_adaptive_kstar(1.0, 2.0, 8, 0.125).unwrap();
        assert!((l2 / l - 2f64.powf(4.0 / 3.0)).abs() < 1e-12);
        let u = lambda_universal(1.0, 8, 0.1).unwrap();
        assert!((u - 2.093_329_079_402_921).abs() < 1e-12);
        assert!((lambda_universal(2.0, 8, 0.1).unwrap() - 2.0 * u).abs() < 1e-12);
        assert!(lambda_universal(0.0, 8, 0.1).is_err());
        assert!(lambda_universal(1.0, 8, 1.5).is_err());
        assert!(lambda_adaptive_kstar(0.0, 1.0, 8, 0.1).is_err());
        // n/δ ≤ 1 makes the log non-positive; impossible with δ < 1 and n ≥ 1
        assert!(lambda_universal(1.0, 0, 0.5).is_err());
    }

    #[test]
    fn jump_spacing() {
        assert_eq!(min_jump_spacing(&[0.0, 1.0, 0.0, 1.0]), Some(1));
        assert_eq!(min_jump_spacing(&[0.0, 0.0, 1.0, 1.0, 2.0, 2.0]), Some(2));
        assert_eq!(min_jump_spacing(&[0.0, 0.0, 0.0]), None);
        assert_eq!(min_jump_spacing(&[0.0, 1.0]), None);
    }

    #[test]
    fn sigma_diff() {
        let c = Sequence::constant(10, 3.0).unwrap();
        assert_eq!(estimate_sigma_diff(&c).unwrap().sigma, 0.0);
        let alt = Sequence::new((0..10).map(|i| if i % 2 == 0 { 0.0 } else { 2.0 }).collect()).unwrap();
        let s = estimate_sigma_diff(&alt).unwrap();
        assert!((s.sigma * s.sigma - 2.0).abs() < 1e-12);
        assert_eq!(s.source, NoiseSource::EstimatedDiff);
        assert!(estimate_sigma_diff(&Sequence::new(vec![1.0]).unwrap()).is_err());
    }
}
