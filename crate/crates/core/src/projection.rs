//! Orthogonal projectors onto the pattern subspaces and the pattern priors.
//!
//! `V_J` holds the sequences that are constant between consecutive jumps in
//! `J`; its projector is block averaging. `W_J` holds the sequences that are
//! affine between consecutive knots in `J` (together with the endpoints). The
//! hinge basis `1, (i), max(i - t, 0)` spans `W_J`, but we parametrise it by
//! the piecewise-linear tent functions on the nodes `{1} ∪ J ∪ {n}`: same span,
//! tridiagonal Gram matrix, and a conditioning that does not degrade with `n`.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use crate::error::{domain, Result};
use crate::seq::{Pattern, PatternFamily, Sequence};

/// `P_J y`: block means of `y` over the blocks delimited by the jump set.
pub fn project_piecewise_constant(y: &Sequence, jumps: &Pattern) -> Result<Sequence> {
    jumps.check(PatternFamily::Monotone, y.len())?;
    let mut out = vec![0.0; y.len()];
    block_means_into(y, jumps.indices(), &mut out);
    Ok(Sequence::from_vec_unchecked(out))
}

/// Writes the block means of `y` into `out`; `jumps` are 1-based and sorted.
pub(crate) fn block_means_into(y: &[f64], jumps: &[usize], out: &mut [f64]) {
    let n = y.len();
    let mut start = 0;
    for end in jumps.iter().copied().chain(std::iter::once(n)) {
        let block = &y[start..end];
        let mean = block.iter().sum::<f64>() / block.len() as f64;
        out[start..end].fill(mean);
        start = end;
    }
}

/// `Q_J y`: least-squares projection onto piecewise-linear sequences with
/// kinks allowed only at the knots of `J`.
pub fn project_piecewise_linear(y: &Sequence, knots: &Pattern) -> Result<Sequence> {
    let proj = ConvexProjector::new(y.len(), knots)?;
    Ok(Sequence::from_vec_unchecked(proj.project(y)))
}

/// A factorised projector onto `W_J` for one knot set.
#[derive(Clone, Debug)]
pub struct ConvexProjector {
    n: usize,
    /// 0-based node positions: `0`, the knots, `n - 1`.
    nodes: Vec<usize>,
    /// Cholesky factor of the tent Gram matrix: diagonal and sub-diagonal.
    chol_diag: Vec<f64>,
    chol_sub: Vec<f64>,
}

impl ConvexProjector {
    pub fn new(n: usize, knots: &Pattern) -> Result<Self> {
        knots.check(PatternFamily::Convex, n)?;
        let mut nodes = Vec::with_capacity(knots.len() + 2);
        nodes.push(0);
        nodes.extend(knots.indices().iter().map(|&i| i - 1));
        nodes.push(n - 1);
        Ok(Self::from_nodes(n, nodes))
    }

    fn from_nodes(n: usize, nodes: Vec<usize>) -> Self {
        let m = nodes.len();
        let mut diag = vec![0.0; m];
        let mut off = vec![0.0; m - 1];
        for a in 0..m - 1 {
            let (t0, t1) = (nodes[a], nodes[a + 1]);
            let len = (t1 - t0) as f64;
            for j in t0..t1 {
                let s = (j - t0) as f64 / len;
                diag[a] += (1.0 - s) * (1.0 - s);
                diag[a + 1] += s * s;
                off[a] += (1.0 - s) * s;
            }
        }
        // last point carries the final tent alone
        diag[m - 1] += 1.0;

        let mut chol_diag = vec![0.0; m];
        let mut chol_sub = vec![0.0; m - 1];
        chol_diag[0] = diag[0].sqrt();
        for a in 1..m {
            let e = off[a - 1] / chol_diag[a - 1];
            chol_sub[a - 1] = e;
            chol_diag[a] = (diag[a] - e * e).sqrt();
        }
        Self {
            n,
            nodes,
            chol_diag,
            chol_sub,
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Dimension `|J| + 2` of `W_J`.
    pub fn dim(&self) -> usize {
        self.nodes.len()
    }

    pub fn project(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        self.project_into(y, &mut out);
        out
    }

    pub fn project_into(&self, y: &[f64], out: &mut [f64]) {
        debug_assert_eq!(y.len(), self.n);
        let m = self.nodes.len();
        let mut rhs = vec![0.0; m];
        for a in 0..m - 1 {
            let (t0, t1) = (self.nodes[a], self.nodes[a + 1]);
            let len = (t1 - t0) as f64;
            for (j, &yj) in y.iter().enumerate().take(t1).skip(t0) {
                let s = (j - t0) as f64 / len;
                rhs[a] += (1.0 - s) * yj;
                rhs[a + 1] += s * yj;
            }
        }
        rhs[m - 1] += y[self.n - 1];

        // L z = rhs, then L^T c = z
        rhs[0] /= self.chol_diag[0];
        for a in 1..m {
            rhs[a] = (rhs[a] - self.chol_sub[a - 1] * rhs[a - 1]) / self.chol_diag[a];
        }
        rhs[m - 1] /= self.chol_diag[m - 1];
        for a in (0..m - 1).rev() {
            rhs[a] = (rhs[a] - self.chol_sub[a] * rhs[a + 1]) / self.chol_diag[a];
        }

        for a in 0..m - 1 {
            let (t0, t1) = (self.nodes[a], self.nodes[a + 1]);
            let len = (t1 - t0) as f64;
            for (j, o) in out.iter_mut().enumerate().take(t1).skip(t0) {
                let s = (j - t0) as f64 / len;
                *o = (1.0 - s) * rhs[a] + s * rhs[a + 1];
            }
        }
        out[self.n - 1] = rhs[m - 1];
    }
}

/// Shared cache of convex projectors keyed by knot set. Reads take a shared
/// lock; a miss builds the factorisation and inserts it under the write lock.
#[derive(Debug, Default)]
pub struct ProjectorCache {
    map: RwLock<HashMap<Pattern, Arc<ConvexProjector>>>,
}

impl ProjectorCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, n: usize, knots: &Pattern) -> Result<Arc<ConvexProjector>> {
        if let Some(p) = self.map.read().expect("projector cache poisoned").get(knots) {
            if p.len() == n {
                return Ok(Arc::clone(p));
            }
        }
        let proj = Arc::new(ConvexProjector::new(n, knots)?);
        self.map
            .write()
            .expect("projector cache poisoned")
            .insert(knots.clone(), Arc::clone(&proj));
        Ok(proj)
    }

    pub fn len(&self) -> usize {
        self.map.read().expect("projector cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// `ln C(n, k)` as a sum of logarithms (exact enough for priors, no overflow).
pub fn ln_binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    let k = k.min(n - k);
    (1..=k).map(|i| ((n - k + i) as f64).ln() - (i as f64).ln()).sum()
}

/// `ln Σ_{i=0}^{m-1} e^{-i}`.
fn ln_geometric_normaliser(m: usize) -> f64 {
    (-(-(m as f64)).exp_m1()).ln() - (-(-1.0f64).exp_m1()).ln()
}

/// `ln π_J` for a jump set of cardinality `card` at length `n`.
pub fn log_prior_monotone(card: usize, n: usize) -> f64 {
    -(card as f64) - ln_geometric_normaliser(n) - ln_binomial(n - 1, card)
}

/// `ln ν_J` for a knot set of cardinality `card` at length `n`.
pub fn log_prior_convex(card: usize, n: usize) -> f64 {
    -(card as f64) - ln_geometric_normaliser(n - 1) - ln_binomial(n - 2, card)
}

pub fn log_prior(family: PatternFamily, card: usize, n: usize) -> f64 {
    match family {
        PatternFamily::Monotone => log_prior_monotone(card, n),
        PatternFamily::Convex => log_prior_convex(card, n),
    }
}

/// `π_J = e^{-|J|} / (H · C(n-1, |J|))`. The empty set is included with
/// weight `1/H`, which makes the weights sum to one.
pub fn prior_weight_monotone(jumps: &Pattern, n: usize) -> Result<f64> {
    jumps.check(PatternFamily::Monotone, n)?;
    Ok(log_prior_monotone(jumps.len(), n).exp())
}

/// `ν_J = e^{-|J|} / (H_C · C(n-2, |J|))`.
pub fn prior_weight_convex(knots: &Pattern, n: usize) -> Result<f64> {
    knots.check(PatternFamily::Convex, n)?;
    Ok(log_prior_convex(knots.len(), n).exp())
}

/// Whether `ln(1/π_J) <= 2(|J|+1) ln(en/(|J|+1)) + 1/2`.
pub fn log_prior_bound_check(jumps: &Pattern, n: usize) -> Result<bool> {
    jumps.check(PatternFamily::Monotone, n)?;
    if n < 2 {
        return domain("prior needs n >= 2");
    }
    let d = (jumps.len() + 1) as f64;
    let lhs = -log_prior_monotone(jumps.len(), n);
    let rhs = 2.0 * d * (std::f64::consts::E * n as f64 / d).ln() + 0.5;
    Ok(lhs <= rhs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(v: &[f64]) -> Sequence {
        Sequence::new(v.to_vec()).unwrap()
    }

    fn all_subsets(lo: usize, hi: usize) -> Vec<Vec<usize>> {
        let slots: Vec<usize> = (lo..=hi).collect();
        (0..1u32 << slots.len())
            .map(|mask| {
                slots
                    .iter()
                    .enumerate()
                    .filter(|(b, _)| mask >> b & 1 == 1)
                    .map(|(_, &i)| i)
                    .collect()
            })
            .collect()
    }

    #[test]
    fn piecewise_constant_examples() {
        let y = seq(&[1.0, 3.0, 5.0, 7.0]);
        let p = |j: Vec<usize>| {
            project_piecewise_constant(&y, &Pattern::monotone(4, j).unwrap())
                .unwrap()
                .into_vec()
        };
        assert_eq!(p(vec![2]), vec![2.0, 2.0, 6.0, 6.0]);
        assert_eq!(p(vec![]), vec![4.0; 4]);
        assert_eq!(p(vec![1, 2, 3]), vec![1.0, 3.0, 5.0, 7.0]);
    }

    #[test]
    fn piecewise_linear_examples() {
        let p = |y: &[f64], j: Vec<usize>| {
            project_piecewise_linear(&seq(y), &Pattern::convex(y.len(), j).unwrap())
                .unwrap()
                .into_vec()
        };
        for (a, b) in p(&[0.0, 1.0, 2.0, 3.0], vec![]).iter().zip([0.0, 1.0, 2.0, 3.0]) {
            assert!((a - b).abs() < 1e-14);
        }
        for a in p(&[1.0, 0.0, 0.0, 1.0], vec![]) {
            assert!((a - 0.5).abs() < 1e-14);
        }
        for (a, b) in p(&[1.0, 0.0, 0.0, 1.0], vec![2, 3]).iter().zip([1.0, 0.0, 0.0, 1.0]) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn wrong_domain_is_rejected() {
        let y = seq(&[1.0, 2.0, 3.0]);
        let mono = Pattern::monotone(3, vec![1]).unwrap();
        assert!(project_piecewise_linear(&y, &mono).is_err());
        let long = Pattern::monotone(6, vec![5]).unwrap();
        assert!(project_piecewise_constant(&y, &long).is_err());
    }

    #[test]
    fn prior_closed_forms() {
        let e = Pattern::monotone(2, vec![]).unwrap();
        let one = Pattern::monotone(2, vec![1]).unwrap();
        assert!((prior_weight_monotone(&e, 2).unwrap() - 0.731_058_578_630_004_9).abs() < 1e-15);
        assert!((prior_weight_monotone(&one, 2).unwrap() - 0.268_941_421_369_995_1).abs() < 1e-15);
        let e = Pattern::convex(3, vec![]).unwrap();
        let two = Pattern::convex(3, vec![2]).unwrap();
        assert!((prior_weight_convex(&e, 3).unwrap() - 0.731_058_578_630_004_9).abs() < 1e-15);
        assert!((prior_weight_convex(&two, 3).unwrap() - 0.268_941_421_369_995_1).abs() < 1e-15);
    }

    #[test]
    fn priors_sum_to_one() {
        for n in 2..=12 {
            let total: f64 = all_subsets(1, n - 1)
                .into_iter()
                .map(|j| prior_weight_monotone(&Pattern::monotone(n, j).unwrap(), n).unwrap())
                .sum();
            assert!((total - 1.0).abs() < 1e-12, "monotone n={n}: {total}");
        }
        for n in 3..=12 {
            let total: f64 = all_subsets(2, n - 1)
                .into_iter()
                .map(|j| prior_weight_convex(&Pattern::convex(n, j).unwrap(), n).unwrap())
                .sum();
            assert!((total - 1.0).abs() < 1e-12, "convex n={n}: {total}");
        }
    }

    #[test]
    fn prior_bound_holds_exhaustively() {
        assert!(log_prior_bound_check(&Pattern::monotone(8, vec![]).unwrap(), 8).unwrap());
        assert!(log_prior_bound_check(&Pattern::monotone(8, (1..=7).collect()).unwrap(), 8).unwrap());
        for n in 2..=12 {
            for j in all_subsets(1, n - 1) {
                assert!(log_prior_bound_check(&Pattern::monotone(n, j).unwrap(), n).unwrap());
            }
        }
    }

    #[test]
    fn large_n_priors_are_finite() {
        let lp = log_prior_monotone(100, 1000);
        assert!(lp.is_finite() && lp < 0.0);
        assert!((ln_binomial(10, 3) - 120f64.ln()).abs() < 1e-13);
    }

    #[test]
    fn cache_reuses_factorisations() {
        let cache = ProjectorCache::new();
        let j = Pattern::convex(6, vec![3]).unwrap();
        let a = cache.get(6, &j).unwrap();
        let b = cache.get(6, &j).unwrap();
        assert!(Arc::ptr_eq(&a, &b));
        assert_eq!(cache.len(), 1);
        assert_eq!(a.dim(), 3);
    }
}
