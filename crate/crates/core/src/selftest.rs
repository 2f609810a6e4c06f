//! Quick invariant checks run by `spagg selftest`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::estimators::{convex_ls, isotonic_ls, tv_denoise, tv_kkt_residual, CONVEX_LS_TOL};
use crate::harness::{monte_carlo_risk, EstimatorSpec};
use crate::lower::{convex_hypotheses, monotone_hypotheses, vg_packing};
use crate::oracle::{k_star, staircase_approx};
use crate::projection::{log_prior_convex, log_prior_monotone, project_piecewise_constant, project_piecewise_linear};
use crate::qagg::{solve_qagg, Dictionary, DictionaryMode, QAggConfig};
use crate::seq::{count_pieces_k, is_convex_tol, is_monotone, scaled_dist_sq, Pattern, PatternFamily, Sequence};

#[derive(Clone, Debug, Serialize)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

type Check = (&'static str, fn() -> Result<String, String>);

const CHECKS: &[Check] = &[
    ("prior masses sum to one", priors),
    ("projections are idempotent", projections),
    ("isotonic fit is monotone and made of block means", isotonic),
    ("convex fit is convex", convex),
    ("tv fit satisfies its optimality conditions", tv),
    ("q-aggregation certificates", qagg),
    ("staircase approximation error and pieces", staircase),
    ("packing constructions", packings),
    ("identity risk equals sigma squared", identity_risk),
];

pub fn run_selftest() -> Vec<CheckOutcome> {
    CHECKS
        .iter()
        .map(|(name, f)| {
            let (passed, detail) = match f() {
                Ok(d) => (true, d),
                Err(d) => (false, d),
            };
            CheckOutcome { name, passed, detail }
        })
        .collect()
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-2.0..2.0)).collect()
}

fn priors() -> Result<String, String> {
    let mut worst = 0.0f64;
    for n in [3usize, 5, 10, 40] {
        let mut total = 0.0;
        for c in 0..n {
            total += crate::projection::ln_binomial(n - 1, c).exp() * log_prior_monotone(c, n).exp();
        }
        worst = worst.max((total - 1.0).abs());
        let mut total = 0.0;
        for c in 0..=n - 2 {
            total += crate::projection::ln_binomial(n - 2, c).exp() * log_prior_convex(c, n).exp();
        }
        worst = worst.max((total - 1.0).abs());
    }
    ensure(worst < 1e-10, || format!("largest deviation {worst:e}"))?;
    Ok(format!("largest deviation {worst:e}"))
}

fn projections() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..50 {
        let y = Sequence::new(random_vec(&mut rng, 9)).map_err(|e| e.to_string())?;
        let j = Pattern::monotone(9, vec![2, 5, 7]).map_err(|e| e.to_string())?;
        let p = project_piecewise_constant(&y, &j).map_err(|e| e.to_string())?;
        let pp = project_piecewise_constant(&p, &j).map_err(|e| e.to_string())?;
        ensure(scaled_dist_sq(&p, &pp) < 1e-24, || "piecewise constant".into())?;
        let k = Pattern::convex(9, vec![3, 6]).map_err(|e| e.to_string())?;
        let q = project_piecewise_linear(&y, &k).map_err(|e| e.to_string())?;
        let qq = project_piecewise_linear(&q, &k).map_err(|e| e.to_string())?;
        ensure(scaled_dist_sq(&q, &qq) < 1e-20, || "piecewise linear".into())?;
    }
    Ok("50 instances".into())
}

fn isotonic() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..100 {
        let y = random_vec(&mut rng, 12);
        let u = isotonic_ls(&y);
        ensure(is_monotone(&u), || format!("not monotone for {y:?}"))?;
        let mut jumps = Vec::new();
        for i in 1..u.len() {
            if u[i] != u[i - 1] {
                jumps.push(i);
            }
        }
        let ys = Sequence::new(y.clone()).map_err(|e| e.to_string())?;
        let p = Pattern::monotone(12, jumps).map_err(|e| e.to_string())?;
        let block = project_piecewise_constant(&ys, &p).map_err(|e| e.to_string())?;
        ensure(scaled_dist_sq(&block, &u) < 1e-20, || {
            "fit is not the block means".into()
        })?;
    }
    Ok("100 instances".into())
}

fn convex() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        let y = random_vec(&mut rng, 10);
        let u = convex_ls(&y, CONVEX_LS_TOL).map_err(|e| e.to_string())?;
        ensure(is_convex_tol(&u, 1e-9), || format!("not convex for {y:?}"))?;
        let mean_y = y.iter().sum::<f64>() / 10.0;
        let mean_u = u.iter().sum::<f64>() / 10.0;
        ensure((mean_y - mean_u).abs() < 1e-9, || "means differ".into())?;
    }
    Ok("50 instances".into())
}

fn tv() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let y = random_vec(&mut rng, 15);
        let pen = rng.random_range(0.05..3.0);
        let u = tv_denoise(&y, pen);
        worst = worst.max(tv_kkt_residual(&y, &u, pen));
    }
    ensure(worst < 1e-9, || format!("KKT residual {worst:e}"))?;
    Ok(format!("largest KKT residual {worst:e}"))
}

fn qagg() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    for family in [PatternFamily::Monotone, PatternFamily::Convex] {
        let dict = Dictionary::build(family, 8, DictionaryMode::Exhaustive).map_err(|e| e.to_string())?;
        for _ in 0..10 {
            let y = Sequence::new(random_vec(&mut rng, 8)).map_err(|e| e.to_string())?;
            let sol = solve_qagg(&y, 1.0, &dict, &QAggConfig::default()).map_err(|e| e.to_string())?;
            ensure((sol.weights.sum() - 1.0).abs() < 1e-12, || {
                "weights off the simplex".into()
            })?;
            worst = worst.max(sol.dual_gap);
        }
    }
    ensure(worst <= 1e-8, || format!("duality gap {worst:e}"))?;
    Ok(format!("largest duality gap {worst:e}"))
}

fn staircase() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..100 {
        let mut v = random_vec(&mut rng, 30);
        v.sort_by(f64::total_cmp);
        let mu = Sequence::new(v).map_err(|e| e.to_string())?;
        let var = mu[29] - mu[0];
        for k in [1usize, 2, 5, 13] {
            let u = staircase_approx(&mu, k).map_err(|e| e.to_string())?;
            let sup = u.iter().zip(mu.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            ensure(sup <= var / (2.0 * k as f64) + 1e-12, || {
                format!("sup error {sup} for k = {k}")
            })?;
            ensure(count_pieces_k(&u) <= k, || format!("too many pieces for k = {k}"))?;
        }
    }
    let ks = k_star(1.0, 1.0, 100).map_err(|e| e.to_string())?;
    Ok(format!("100 instances, k*(V=1, sigma=1, n=100) = {ks}"))
}

fn packings() -> Result<String, String> {
    let p = vg_packing(24, 0).map_err(|e| e.to_string())?;
    ensure(p.check().all(), || "VG packing for k = 24".into())?;
    let m = monotone_hypotheses(64, 4, 1.0, 1.0, 0).map_err(|e| e.to_string())?;
    ensure(m.all_ok(), || "monotone hypotheses (64, 4)".into())?;
    let c = convex_hypotheses(64, 4, 1.0, 0).map_err(|e| e.to_string())?;
    ensure(c.packing_checks.all() && c.separation_ok && c.budget_ok, || {
        "convex hypotheses (64, 4)".into()
    })?;
    Ok(format!(
        "|Ω| = {} for k = 24; convex construction has up to {} pieces",
        p.len(),
        c.max_piece_count
    ))
}

fn identity_risk() -> Result<String, String> {
    let mu = Sequence::zeros(50).map_err(|e| e.to_string())?;
    let est = EstimatorSpec::Identity.prepare(&mu, 1.0).map_err(|e| e.to_string())?;
    let r = monte_carlo_risk(est.as_ref(), &mu, 1.0, 2000, 99).map_err(|e| e.to_string())?;
    ensure((r.mean - 1.0).abs() <= 4.0 * r.stderr, || {
        format!("mean {} with standard error {}", r.mean, r.stderr)
    })?;
    Ok(format!("{:.4} ± {:.4}", r.mean, r.stderr))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_checks_pass() {
        for o in run_selftest() {
            assert!(o.passed, "{}: {}", o.name, o.detail);
        }
    }
}
