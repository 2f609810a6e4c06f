//! Oracle terms and right-hand sides of the risk bounds.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::estimators::{isotonic_ls, min_jump_spacing};
use crate::projection::ConvexProjector;
use crate::seq::{count_pieces_k, is_monotone, scaled_dist_sq, Pattern, PatternFamily, Sequence};

/// Largest `n` for which every knot set is enumerated.
pub const CONVEX_EXHAUSTIVE_MAX_N: usize = 18;

/// Optimal piecewise-constant approximations with up to `max_k` pieces for
/// every prefix of a sequence.
#[derive(Clone, Debug)]
pub struct SegmentationTable {
    n: usize,
    max_k: usize,
    /// `cost[k-1][i]`: least sum of squares over the first `i` points with at
    /// most `k` blocks (unscaled).
    cost: Vec<Vec<f64>>,
    /// `start[k-1][i]`: first index of the last block, for `exactly` k blocks.
    start: Vec<Vec<usize>>,
    /// `blocks[k-1][i]`: number of blocks actually used by `cost[k-1][i]`.
    blocks: Vec<Vec<usize>>,
    values: Vec<f64>,
}

impl SegmentationTable {
    pub fn build(mu: &[f64], max_k: usize) -> Result<Self> {
        let n = mu.len();
        if n == 0 || max_k == 0 || max_k > n {
            return domain(format!("segmentation needs 1 <= k <= n, got k = {max_k}, n = {n}"));
        }
        // centring reduces cancellation in the prefix-sum costs
        let c = mu.iter().sum::<f64>() / n as f64;
        let mut s1 = vec![0.0; n + 1];
        let mut s2 = vec![0.0; n + 1];
        for (i, &v) in mu.iter().enumerate() {
            let x = v - c;
            s1[i + 1] = s1[i] + x;
            s2[i + 1] = s2[i] + x * x;
        }
        let seg = |s: usize, e: usize| {
            let len = (e - s) as f64;
            let a = s1[e] - s1[s];
            if e - s == 1 {
                0.0
            } else {
                (s2[e] - s2[s] - a * a / len).max(0.0)
            }
        };

        let mut exact = vec![vec![f64::INFINITY; n + 1]; max_k];
        let mut start = vec![vec![0usize; n + 1]; max_k];
        for e in 1..=n {
            exact[0][e] = seg(0, e);
        }
        for k in 1..max_k {
            for e in k + 1..=n {
                let mut best = (f64::INFINITY, 0);
                for s in k..e {
                    let v = exact[k - 1][s] + seg(s, e);
                    if v < best.0 {
                        best = (v, s);
                    }
                }
                exact[k][e] = best.0;
                start[k][e] = best.1;
            }
        }
        let mut cost = vec![vec![0.0; n + 1]; max_k];
        let mut blocks = vec![vec![1usize; n + 1]; max_k];
        for e in 1..=n {
            cost[0][e] = exact[0][e];
            for k in 1..max_k {
                if exact[k][e] < cost[k - 1][e] {
                    cost[k][e] = exact[k][e];
                    blocks[k][e] = k + 1;
                } else {
                    cost[k][e] = cost[k - 1][e];
                    blocks[k][e] = blocks[k - 1][e];
                }
            }
        }
        let values = (0..max_k).map(|k| cost[k][n] / n as f64).collect();
        Ok(Self {
            n,
            max_k,
            cost,
            start,
            blocks,
            values,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn max_k(&self) -> usize {
        self.max_k
    }

    /// `min_{k(u) ≤ k} ‖μ - u‖²` in the scaled norm.
    pub fn value(&self, k: usize) -> f64 {
        self.values[k - 1]
    }

    /// Unscaled optimal cost over the first `i` points with at most `k` blocks.
    pub fn prefix_cost(&self, k: usize, i: usize) -> f64 {
        self.cost[k - 1][i]
    }

    /// Block boundaries (0-based starts, then `n`) of an optimal segmentation.
    pub fn boundaries(&self, k: usize) -> Vec<usize> {
        let mut b = self.blocks[k - 1][self.n];
        let mut e = self.n;
        let mut cuts = vec![self.n];
        while b > 1 {
            let s = self.start[b - 1][e];
            cuts.push(s);
            e = s;
            b -= 1;
        }
        cuts.push(0);
        cuts.reverse();
        cuts
    }

    /// The optimal approximation itself: block means over the boundaries.
    pub fn fit(&self, mu: &[f64], k: usize) -> Vec<f64> {
        let cuts = self.boundaries(k);
        let mut out = vec![0.0; self.n];
        for w in cuts.windows(2) {
            let block = &mu[w[0]..w[1]];
            let m = block.iter().sum::<f64>() / block.len() as f64;
            out[w[0]..w[1]].fill(m);
        }
        out
    }
}

/// Best approximation with at most `k` constant pieces and its scaled error.
pub fn best_segmentation(mu: &Sequence, k: usize) -> Result<(Sequence, f64)> {
    let table = SegmentationTable::build(mu, k)?;
    let fit = table.fit(mu, k);
    let value = scaled_dist_sq(&fit, mu);
    Ok((Sequence::from_vec_unchecked(fit), value))
}

/// Constants of an oracle right-hand side
/// `leading · approx + penalty · σ² d/n · (log(en/d))^exponent`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundSpec {
    pub leading_constant: f64,
    pub penalty_constant: f64,
    pub penalty_exponent: f64,
    pub family: PatternFamily,
}

impl BoundSpec {
    pub fn new(family: PatternFamily, leading: f64, penalty: f64, exponent: f64) -> Result<Self> {
        let s = Self {
            leading_constant: leading,
            penalty_constant: penalty,
            penalty_exponent: exponent,
            family,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn monotone(leading: f64, penalty: f64, exponent: f64) -> Result<Self> {
        Self::new(PatternFamily::Monotone, leading, penalty, exponent)
    }

    pub fn convex(leading: f64, penalty: f64, exponent: f64) -> Result<Self> {
        Self::new(PatternFamily::Convex, leading, penalty, exponent)
    }

    /// Parses `C:c:e`.
    pub fn parse(family: PatternFamily, text: &str) -> Result<Self> {
        let parts: Vec<&str> = text.split(':').collect();
        let bad = || Error::Config(format!("bound spec must look like C:c:e, got `{text}`"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let v: Vec<f64> = parts
            .iter()
            .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<Result<_>>()?;
        Self::new(family, v[0], v[1], v[2])
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.leading_constant >= 1.0 && self.leading_constant.is_finite()) {
            return domain("leading constant must be >= 1");
        }
        if !(self.penalty_constant > 0.0 && self.penalty_constant.is_finite()) {
            return domain("penalty constant must be positive");
        }
        if !(self.penalty_exponent >= 1.0 && self.penalty_exponent.is_finite()) {
            return domain("penalty exponent must be >= 1");
        }
        Ok(())
    }

    /// `penalty · σ² d/n · (log(en/d))^exponent` for `d` pieces.
    pub fn penalty(&self, sigma: f64, n: usize, d: usize) -> f64 {
        let nf = n as f64;
        let df = d as f64;
        self.penalty_constant * sigma * sigma * df / nf
            * (std::f64::consts::E * nf / df).ln().powf(self.penalty_exponent)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OracleTerm {
    /// Number of pieces.
    pub pieces: usize,
    pub approximation: f64,
    pub penalty: f64,
    pub total: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OracleTable {
    pub terms: Vec<OracleTerm>,
    pub best_pieces: usize,
    pub value: f64,
}

fn check_sigma(sigma: f64) -> Result<()> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return domain(format!("sigma must be positive, got {sigma}"));
    }
    Ok(())
}

fn tabulate(approx: impl Iterator<Item = (usize, f64)>, sigma: f64, n: usize, spec: &BoundSpec) -> OracleTable {
    let terms: Vec<OracleTerm> = approx
        .map(|(d, a)| {
            let penalty = spec.penalty(sigma, n, d);
            OracleTerm {
                pieces: d,
                approximation: a,
                penalty,
                total: spec.leading_constant * a + penalty,
            }
        })
        .collect();
    let best = terms
        .iter()
        .min_by(|a, b| a.total.total_cmp(&b.total))
        .expect("at least one term");
    OracleTable {
        best_pieces: best.pieces,
        value: best.total,
        terms,
    }
}

/// Per-`k` oracle terms `leading · min_{k(u)≤k} ‖μ - u‖² + pen(k)` for
/// `k = 1..=k_max`.
pub fn oracle_table_monotone(mu: &Sequence, sigma: f64, spec: &BoundSpec, k_max: usize) -> Result<OracleTable> {
    check_sigma(sigma)?;
    spec.validate()?;
    if spec.family != PatternFamily::Monotone {
        return domain("monotone oracle needs a monotone bound spec");
    }
    let k_max = k_max.clamp(1, mu.len());
    let table = SegmentationTable::build(mu, k_max)?;
    Ok(tabulate(
        (1..=k_max).map(|k| (k, table.value(k))),
        sigma,
        mu.len(),
        spec,
    ))
}

/// `min_k [leading · min_{k(u)≤k} ‖μ - u‖² + penalty · σ² k/n · (log(en/k))^e]`.
pub fn oracle_rhs_monotone(mu: &Sequence, sigma: f64, spec: &BoundSpec) -> Result<f64> {
    Ok(oracle_table_monotone(mu, sigma, spec, mu.len())?.value)
}

/// As [`oracle_table_monotone`] with the comparator restricted to monotone
/// `u`: the approximation term is `‖μ - iso(μ)‖² + min_{k(u)≤k} ‖iso(μ) - u‖²`.
/// Exact when `μ` is monotone.
pub fn oracle_table_monotone_restricted(
    mu: &Sequence,
    sigma: f64,
    spec: &BoundSpec,
    k_max: usize,
) -> Result<OracleTable> {
    check_sigma(sigma)?;
    spec.validate()?;
    let iso = isotonic_ls(mu);
    let base = scaled_dist_sq(mu, &iso);
    let k_max = k_max.clamp(1, mu.len());
    let table = SegmentationTable::build(&iso, k_max)?;
    Ok(tabulate(
        (1..=k_max).map(|k| (k, base + table.value(k))),
        sigma,
        mu.len(),
        spec,
    ))
}

pub fn oracle_rhs_monotone_restricted(mu: &Sequence, sigma: f64, spec: &BoundSpec) -> Result<f64> {
    Ok(oracle_table_monotone_restricted(mu, sigma, spec, mu.len())?.value)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "search", rename_all = "snake_case")]
pub enum ConvexSearch {
    Exhaustive,
    /// Forward selection of knots by largest error reduction.
    Greedy {
        max_knots: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvexOracle {
    pub value: f64,
    pub knots: Pattern,
    pub approximation: f64,
    /// True when the search was not exhaustive, so `value` only bounds the
    /// oracle from above.
    pub upper_bound: bool,
}

/// `min_J [leading · ‖μ - Q_J μ‖² + penalty · σ²(|J|+1)/n · (log(en/(|J|+1)))^e]`.
pub fn oracle_rhs_convex(mu: &Sequence, sigma: f64, spec: &BoundSpec, search: ConvexSearch) -> Result<ConvexOracle> {
    check_sigma(sigma)?;
    spec.validate()?;
    if spec.family != PatternFamily::Convex {
        return domain("convex oracle needs a convex bound spec");
    }
    let n = mu.len();
    if n < 3 {
        return domain("convex oracle needs n >= 3");
    }
    let eval = |knots: Vec<usize>| -> Result<(f64, f64, Pattern)> {
        let p = Pattern::convex(n, knots)?;
        let fit = ConvexProjector::new(n, &p)?.project(mu);
        let a = scaled_dist_sq(mu, &fit);
        let total = spec.leading_constant * a + spec.penalty(sigma, n, p.len() + 1);
        Ok((total, a, p))
    };
    match search {
        ConvexSearch::Exhaustive => {
            if n > CONVEX_EXHAUSTIVE_MAX_N {
                return Err(Error::Capacity(format!(
                    "exhaustive convex oracle limited to n <= {CONVEX_EXHAUSTIVE_MAX_N} (got {n}); use greedy search"
                )));
            }
            let slots: Vec<usize> = (2..n).collect();
            let mut best: Option<(f64, f64, Pattern)> = None;
            for mask in 0u32..(1u32 << slots.len()) {
                let knots = slots
                    .iter()
                    .enumerate()
                    .filter(|(b, _)| mask >> b & 1 == 1)
                    .map(|(_, &i)| i)
                    .collect();
                let cand = eval(knots)?;
                if best.as_ref().is_none_or(|b| cand.0 < b.0) {
                    best = Some(cand);
                }
            }
            let (value, approximation, knots) = best.expect("at least the empty set");
            Ok(ConvexOracle {
                value,
                knots,
                approximation,
                upper_bound: false,
            })
        }
        ConvexSearch::Greedy { max_knots } => {
            let mut current: Vec<usize> = Vec::new();
            let mut best = eval(Vec::new())?;
            let mut current_err = best.1;
            for _ in 0..max_knots.min(n - 2) {
                if current_err == 0.0 {
                    break;
                }
                let mut step: Option<(f64, f64, Pattern)> = None;
                for i in 2..n {
                    if current.contains(&i) {
                        continue;
                    }
                    let mut knots = current.clone();
                    knots.push(i);
                    let cand = eval(knots)?;
                    if step.as_ref().is_none_or(|s| cand.1 < s.1) {
                        step = Some(cand);
                    }
                }
                let Some(step) = step else { break };
                current = step.2.indices().to_vec();
                current_err = step.1;
                if step.0 < best.0 {
                    best = step;
                }
            }
            Ok(ConvexOracle {
                value: best.0,
                approximation: best.1,
                knots: best.2,
                upper_bound: true,
            })
        }
    }
}

/// The staircase `ū_i = μ_1 + ((j - ½)/k) V(μ)` where `μ_i` falls in the
/// `j`-th of `k` equal-width level intervals. Every coordinate is within
/// `V(μ)/(2k)` of `μ` and `ū` has at most `k` pieces.
pub fn staircase_approx(mu: &Sequence, k: usize) -> Result<Sequence> {
    let n = mu.len();
    if k == 0 || k > n {
        return domain(format!("staircase needs 1 <= k <= n, got k = {k}"));
    }
    if !is_monotone(mu) {
        return domain("staircase approximation needs a non-decreasing sequence");
    }
    let lo = mu[0];
    let v = mu[n - 1] - lo;
    if v == 0.0 {
        return Ok(mu.clone());
    }
    let kf = k as f64;
    let out = mu
        .iter()
        .map(|&m| {
            let j = (((m - lo) / v * kf).floor() as usize + 1).min(k);
            lo + (j as f64 - 0.5) / kf * v
        })
        .collect();
    Ok(Sequence::from_vec_unchecked(out))
}

/// The smallest positive integer `m` with `m³ ≥ V² n / (σ² log(en))`.
pub fn k_star(v: f64, sigma: f64, n: usize) -> Result<usize> {
    check_sigma(sigma)?;
    if n == 0 || !(v >= 0.0 && v.is_finite()) {
        return domain("k* needs n >= 1 and V >= 0");
    }
    let nf = n as f64;
    let x = v * v * nf / (sigma * sigma * (std::f64::consts::E * nf).ln());
    let mut m = (x.cbrt().ceil() as usize).max(1);
    while m > 1 && ((m - 1) as f64).powi(3) >= x {
        m -= 1;
    }
    while (m as f64).powi(3) < x {
        m += 1;
    }
    Ok(m)
}

/// The two envelopes of the staircase lemma:
/// `(¼ M, 2 M)` with `M = max((σ² V log(en)/n)^{2/3}, σ² log(en)/n)`.
pub fn lemma_bound_eval(v: f64, sigma: f64, n: usize) -> Result<(f64, f64)> {
    check_sigma(sigma)?;
    if n == 0 || !(v >= 0.0 && v.is_finite()) {
        return domain("lemma bound needs n >= 1 and V >= 0");
    }
    let nf = n as f64;
    let l = (std::f64::consts::E * nf).ln();
    let s2 = sigma * sigma;
    let m = (s2 * v * l / nf).powf(2.0 / 3.0).max(s2 * l / nf);
    Ok((0.25 * m, 2.0 * m))
}

/// `r_n(u) = 3 + 256 (log n + n/Δ(u))`, with `Δ := n` when `u` has fewer
/// than two jumps.
pub fn tv_remainder_factor(u: &[f64]) -> f64 {
    let n = u.len() as f64;
    let delta = min_jump_spacing(u).map_or(n, |d| d as f64);
    3.0 + 256.0 * (n.ln() + n / delta)
}

/// Penalty part `4σ² k(u) log(n/δ)/n · r_n(u)` of the TV oracle inequality.
pub fn tv_bound_rhs(u: &Sequence, sigma: f64, n: usize, delta: f64) -> Result<f64> {
    check_sigma(sigma)?;
    if n != u.len() {
        return domain(format!("n = {n} does not match the sequence length {}", u.len()));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return domain("delta must lie in (0, 1)");
    }
    let nf = n as f64;
    let k = count_pieces_k(u) as f64;
    Ok(4.0 * sigma * sigma * k * (nf / delta).ln() / nf * tv_remainder_factor(u))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(v: &[f64]) -> Sequence {
        Sequence::new(v.to_vec()).unwrap()
    }

    #[test]
    fn segmentation_examples() {
        let (fit, v) = best_segmentation(&seq(&[0.0, 0.0, 1.0, 1.0]), 2).unwrap();
        assert_eq!(fit.as_slice(), &[0.0, 0.0, 1.0, 1.0]);
        assert_eq!(v, 0.0);
        let (fit, v) = best_segmentation(&seq(&[0.0, 1.0, 2.0, 3.0]), 2).unwrap();
        assert_eq!(fit.as_slice(), &[0.5, 0.5, 2.5, 2.5]);
        assert!((v - 0.25).abs() < 1e-15);
        let mu = seq(&[3.0, -1.0, 2.5, 7.0, 0.0]);
        let (fit, v) = best_segmentation(&mu, 5).unwrap();
        assert_eq!(fit, mu);
        assert_eq!(v, 0.0);
        assert!(best_segmentation(&mu, 0).is_err());
        assert!(best_segmentation(&mu, 6).is_err());
    }

    #[test]
    fn segmentation_values_decrease() {
        let mu = seq(&[0.3, 1.2, -0.4, 2.2, 2.0, 5.1, 4.9, 0.1]);
        let t = SegmentationTable::build(&mu, 8).unwrap();
        for k in 1..8 {
            assert!(t.value(k + 1) <= t.value(k));
        }
        assert_eq!(t.value(8), 0.0);
        assert!((t.prefix_cost(1, 2) - 0.405).abs() < 1e-12);
    }

    #[test]
    fn monotone_rhs_examples() {
        let spec = BoundSpec::monotone(1.0, 1.0, 1.0).unwrap();
        let c = seq(&[2.0; 6]);
        let v = oracle_rhs_monotone(&c, 0.5, &spec).unwrap();
        assert!((v - 0.25 * (6f64 * std::f64::consts::E).ln() / 6.0).abs() < 1e-14);

        let table = oracle_table_monotone(&seq(&[0.0, 1.0, 2.0, 3.0]), 1.0, &spec, 4).unwrap();
        let expect = [
            1.846_573_590_279_972_6,
            1.096_573_590_279_972_6,
            1.090_761_554_338_835_6,
            1.0,
        ];
        for (t, e) in table.terms.iter().zip(expect) {
            assert!((t.total - e).abs() < 1e-12, "{t:?}");
        }
        assert_eq!(table.best_pieces, 4);
        assert!((table.value - 1.0).abs() < 1e-15);

        let mu = seq(&[0.0, 0.2, 1.3, 1.4, 3.0]);
        let a = oracle_table_monotone(&mu, 1.0, &spec, 5).unwrap();
        let b = oracle_table_monotone(&mu, 2.0, &spec, 5).unwrap();
        for (x, y) in a.terms.iter().zip(&b.terms) {
            assert!((4.0 * x.penalty - y.penalty).abs() < 1e-12);
        }
    }

    #[test]
    fn restricted_matches_plain_on_monotone_input() {
        let spec = BoundSpec::monotone(6.0, 6.0, 1.0).unwrap();
        let mu = seq(&[0.0, 0.2, 1.3, 1.4, 3.0, 3.5]);
        let a = oracle_rhs_monotone(&mu, 0.7, &spec).unwrap();
        let b = oracle_rhs_monotone_restricted(&mu, 0.7, &spec).unwrap();
        assert!((a - b).abs() < 1e-12);
        let bumpy = seq(&[0.0, 2.0, 1.0, 3.0]);
        assert!(
            oracle_rhs_monotone_restricted(&bumpy, 0.7, &spec).unwrap()
                >= oracle_rhs_monotone(&bumpy, 0.7, &spec).unwrap() - 1e-12
        );
    }

    #[test]
    fn convex_oracle_examples() {
        let spec = BoundSpec::convex(1.0, 1.0, 1.0).unwrap();
        let aff = oracle_rhs_convex(&seq(&[1.0, 2.0, 3.0, 4.0, 5.0]), 1.0, &spec, ConvexSearch::Exhaustive).unwrap();
        assert!(aff.knots.is_empty());
        assert!(aff.approximation < 1e-28);
        let kink = oracle_rhs_convex(&seq(&[0.0, 0.0, 0.0, 1.0, 2.0]), 1e-3, &spec, ConvexSearch::Exhaustive).unwrap();
        assert_eq!(kink.knots.indices(), &[3]);
        assert!(kink.approximation < 1e-25);
        let greedy = oracle_rhs_convex(
            &seq(&[0.0, 0.0, 0.0, 1.0, 2.0]),
            1e-3,
            &spec,
            ConvexSearch::Greedy { max_knots: 3 },
        )
        .unwrap();
        assert!(greedy.value >= kink.value - 1e-15);
        assert!(greedy.upper_bound);
        let long = Sequence::zeros(19).unwrap();
        assert!(matches!(
            oracle_rhs_convex(&long, 1.0, &spec, ConvexSearch::Exhaustive),
            Err(Error::Capacity(_))
        ));
        let mono = BoundSpec::monotone(1.0, 1.0, 1.0).unwrap();
        assert!(oracle_rhs_convex(&seq(&[0.0, 1.0, 2.0]), 1.0, &mono, ConvexSearch::Exhaustive).is_err());
    }

    #[test]
    fn staircase_examples() {
        let s = staircase_approx(&seq(&[0.0, 1.0]), 1).unwrap();
        assert_eq!(s.as_slice(), &[0.5, 0.5]);
        let c = seq(&[4.0; 5]);
        assert_eq!(staircase_approx(&c, 3).unwrap(), c);
        assert!(staircase_approx(&seq(&[1.0, 0.0]), 1).is_err());
        let mu = seq(&[0.0, 0.1, 0.45, 0.5, 0.8, 1.0]);
        let s = staircase_approx(&mu, 2).unwrap();
        assert_eq!(s.as_slice(), &[0.25, 0.25, 0.25, 0.75, 0.75, 0.75]);
    }

    #[test]
    fn k_star_examples() {
        assert_eq!(k_star(1.0, 1.0, 8).unwrap(), 2);
        assert_eq!(k_star(0.0, 1.0, 8).unwrap(), 1);
        let big = k_star(1e6, 1.0, 8).unwrap();
        let x = 1e12 * 8.0 / (8.0 * std::f64::consts::E).ln();
        assert!((big as f64).powi(3) >= x && ((big - 1) as f64).powi(3) < x);
    }

    #[test]
    fn lemma_envelopes() {
        let (a, b) = lemma_bound_eval(1.0, 1.0, 8).unwrap();
        assert!((a - 0.132_290_297_592_081_58).abs() < 1e-14);
        assert!((b - 1.058_322_380_736_652_6).abs() < 1e-14);
        let (a, b) = lemma_bound_eval(0.0, 1.0, 8).unwrap();
        let l = (8.0 * std::f64::consts::E).ln() / 8.0;
        assert!((a - 0.25 * l).abs() < 1e-15 && (b - 2.0 * l).abs() < 1e-15);
        assert!((b / a - 8.0).abs() < 1e-12);
    }

    #[test]
    fn tv_rhs() {
        let c = seq(&[1.0; 10]);
        assert!((tv_remainder_factor(&c) - 848.461_783_806_475_8).abs() < 1e-9);
        let adj = seq(&[0.0, 1.0, 2.0, 2.0]);
        assert!((tv_remainder_factor(&adj) - (3.0 + 256.0 * (4f64.ln() + 4.0))).abs() < 1e-9);
        let a = tv_bound_rhs(&c, 1.0, 10, 0.1).unwrap();
        let b = tv_bound_rhs(&c, 1.0, 10, 0.2).unwrap();
        assert!(b < a);
        assert!(tv_bound_rhs(&c, 1.0, 11, 0.1).is_err());
    }

    #[test]
    fn spec_parsing() {
        let s = BoundSpec::parse(PatternFamily::Convex, "6:1:1.25").unwrap();
        assert_eq!(s.leading_constant, 6.0);
        assert_eq!(s.penalty_exponent, 1.25);
        assert!(BoundSpec::parse(PatternFamily::Convex, "6:1").is_err());
        assert!(BoundSpec::parse(PatternFamily::Convex, "0.5:1:1").is_err());
    }
}
