//! Lower-bound constructions: binary packings and the hypothesis families
//! built on them, with every invariant re-checked numerically.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::error::{domain, Error, Result};
use crate::seq::{
    count_knots_q, count_pieces_k, is_convex, is_member, scaled_dist_sq, total_variation_v, PatternFamily, Sequence,
    ShapeClass,
};

/// Longest word length the greedy search accepts; the packing holds about
/// `e^{k/8}` words, so it grows quickly.
pub const VG_MAX_K: usize = 80;
const VG_RESTARTS: u64 = 100;

/// Binary words of length `k` with the zero word first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryPacking {
    pub k: usize,
    /// Bit `b` of a word is coordinate `b + 1`.
    pub codewords: Vec<u128>,
    pub min_pairwise_distance: usize,
    /// Set when `k < 8`, where the size requirement is nearly vacuous.
    pub degenerate: bool,
}

impl BinaryPacking {
    pub fn len(&self) -> usize {
        self.codewords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codewords.is_empty()
    }

    /// Coordinate `j` (1-based) of word `w`.
    pub fn bit(&self, w: usize, j: usize) -> u8 {
        ((self.codewords[w] >> (j - 1)) & 1) as u8
    }

    pub fn word_string(&self, w: usize) -> String {
        (1..=self.k)
            .map(|j| if self.bit(w, j) == 1 { '1' } else { '0' })
            .collect()
    }

    pub fn hamming(&self, a: usize, b: usize) -> usize {
        (self.codewords[a] ^ self.codewords[b]).count_ones() as usize
    }

    /// Whether the zero word is present, `log(|Ω| - 1) ≥ k/8` and every
    /// pairwise distance exceeds `k/8`.
    pub fn check(&self) -> PackingChecks {
        let kf = self.k as f64;
        let zero_present = self.codewords.contains(&0);
        let size_ok = self.codewords.len() >= 2 && ((self.codewords.len() - 1) as f64).ln() >= kf / 8.0;
        let distance_ok = self.min_pairwise_distance as f64 > kf / 8.0;
        PackingChecks {
            zero_present,
            size_ok,
            distance_ok,
        }
    }
}

impl Serialize for BinaryPacking {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct View {
            k: usize,
            size: usize,
            min_pairwise_distance: usize,
            degenerate: bool,
            codewords: Vec<String>,
        }
        View {
            k: self.k,
            size: self.len(),
            min_pairwise_distance: self.min_pairwise_distance,
            degenerate: self.degenerate,
            codewords: (0..self.len()).map(|w| self.word_string(w)).collect(),
        }
        .serialize(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct PackingChecks {
    pub zero_present: bool,
    pub size_ok: bool,
    pub distance_ok: bool,
}

impl PackingChecks {
    pub fn all(&self) -> bool {
        self.zero_present && self.size_ok && self.distance_ok
    }
}

/// Packing size needed for `log(|Ω| - 1) ≥ k/8`.
pub fn vg_target_size(k: usize) -> usize {
    1 + (k as f64 / 8.0).exp().ceil() as usize
}

/// Seeded greedy search for a Varshamov–Gilbert packing of `{0,1}^k`.
///
/// Random words are kept when they are farther than `k/8` from every kept
/// word, until `1 + ⌈e^{k/8}⌉` words are held. A failed attempt restarts
/// with a fresh stream, up to 100 times. For `k = 1` no such packing exists
/// and the two-point packing `{0, 1}` is returned, flagged degenerate.
pub fn vg_packing(k: usize, seed: u64) -> Result<BinaryPacking> {
    if k == 0 {
        return domain("packing word length must be positive");
    }
    if k > VG_MAX_K {
        return Err(Error::Capacity(format!(
            "packing search limited to k <= {VG_MAX_K}: it needs about e^(k/8) words"
        )));
    }
    if k == 1 {
        return Ok(BinaryPacking {
            k,
            codewords: vec![0, 1],
            min_pairwise_distance: 1,
            degenerate: true,
        });
    }
    let target = vg_target_size(k);
    let dmin = k / 8 + 1;
    let mask: u128 = (1u128 << k) - 1;
    let attempts = 200 * target + 10_000;
    for restart in 0..VG_RESTARTS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(restart);
        let mut words: Vec<u128> = vec![0];
        for _ in 0..attempts {
            let w = rng.random::<u128>() & mask;
            if words.iter().all(|&x| (x ^ w).count_ones() as usize >= dmin) {
                words.push(w);
                if words.len() == target {
                    let min_d = min_distance(&words);
                    return Ok(BinaryPacking {
                        k,
                        codewords: words,
                        min_pairwise_distance: min_d,
                        degenerate: k < 8,
                    });
                }
            }
        }
    }
    Err(Error::Search(format!(
        "no packing of {target} words at distance >= {dmin} found for k = {k} after {VG_RESTARTS} restarts"
    )))
}

fn min_distance(words: &[u128]) -> usize {
    (0..words.len())
        .into_par_iter()
        .map(|i| {
            words[i + 1..]
                .iter()
                .map(|&w| (w ^ words[i]).count_ones() as usize)
                .min()
                .unwrap_or(usize::MAX)
        })
        .min()
        .unwrap_or(usize::MAX)
}

/// A hypothesis family with its separation and information budget.
#[derive(Clone, Debug, Serialize)]
pub struct PackingReport {
    pub family: PatternFamily,
    pub n: usize,
    /// `k` for the monotone family, `q` for the convex one.
    pub pieces: usize,
    pub sigma: f64,
    pub gamma: f64,
    pub packing: BinaryPacking,
    pub packing_checks: PackingChecks,
    pub hypotheses: Vec<Sequence>,
    pub class: ShapeClass,
    /// Every hypothesis is in the advertised class.
    pub class_ok: bool,
    /// Largest piece count (`k(u)` or `q(u)`) over the hypotheses.
    pub max_piece_count: usize,
    pub min_sq_separation: f64,
    /// `σ² d / (512 n)`.
    pub separation_floor: f64,
    pub separation_ok: bool,
    /// Largest deviation of `‖u^ω - u^ω'‖²` from `(γ²/d) d_H(ω, ω')`.
    pub separation_identity_error: f64,
    pub max_kl_to_null: f64,
    /// `log(|Ω| - 1)/16`.
    pub kl_budget: f64,
    pub budget_ok: bool,
}

impl PackingReport {
    /// All invariants at once.
    pub fn all_ok(&self) -> bool {
        self.packing_checks.all() && self.class_ok && self.separation_ok && self.budget_ok
    }
}

fn check_common(n: usize, d: usize, sigma: f64) -> Result<()> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return domain(format!("sigma must be positive, got {sigma}"));
    }
    if d == 0 || d > n {
        return domain(format!("need 1 <= pieces <= n, got {d} with n = {n}"));
    }
    Ok(())
}

/// Monotone hypotheses `u^ω_i = ⌊(i-1)k/n⌋ V/(2k) + γ ω_{⌊(i-1)k/n⌋+1}` with
/// `γ = (1/8) √(σ² k/n)`. Requires `k³ ≤ 16 n V²/σ²` so that `γ ≤ V/(2k)`.
pub fn monotone_hypotheses(n: usize, k: usize, v: f64, sigma: f64, seed: u64) -> Result<PackingReport> {
    check_common(n, k, sigma)?;
    if !(v > 0.0 && v.is_finite()) {
        return domain(format!("V must be positive, got {v}"));
    }
    let kf = k as f64;
    let nf = n as f64;
    if kf.powi(3) > 16.0 * nf * v * v / (sigma * sigma) {
        return domain(format!(
            "growth condition k^3 <= 16 n V^2 / sigma^2 fails: {} > {}",
            kf.powi(3),
            16.0 * nf * v * v / (sigma * sigma)
        ));
    }
    let gamma = (sigma * sigma * kf / nf).sqrt() / 8.0;
    let packing = vg_packing(k, seed)?;
    let block = |i: usize| (i - 1) * k / n;
    let hypotheses: Vec<Sequence> = (0..packing.len())
        .into_par_iter()
        .map(|w| {
            let u = (1..=n)
                .map(|i| {
                    let b = block(i);
                    b as f64 * v / (2.0 * kf) + gamma * packing.bit(w, b + 1) as f64
                })
                .collect();
            Sequence::from_vec_unchecked(u)
        })
        .collect();
    let class_k = ShapeClass::MonotoneKPieces { k };
    let class_v = ShapeClass::MonotoneBoundedV { v };
    let class_ok = hypotheses
        .iter()
        .all(|u| is_member(u, &class_k) && is_member(u, &class_v) && total_variation_v(u) <= v);
    let max_piece_count = hypotheses.iter().map(|u| count_pieces_k(u)).max().unwrap_or(0);
    let block_sizes: Vec<usize> = (0..k).map(|b| (1..=n).filter(|&i| block(i) == b).count()).collect();
    Ok(assemble(
        PatternFamily::Monotone,
        n,
        k,
        sigma,
        gamma,
        packing,
        hypotheses,
        class_k,
        class_ok,
        max_piece_count,
        &block_sizes,
    ))
}

/// Convex hypotheses: on block `j` (0-based) the sequence is
/// `ω_{j+1} γ + α_j (i - 1) + β_j`, with `α_j = 2γ + α_{j-1}`,
/// `β_j = β_{j-1} + γ + m_{j-1} α_{j-1}` and `γ = (1/8) √(σ² q/n)`. Blocks are
/// balanced when `q` does not divide `n`.
pub fn convex_hypotheses(n: usize, q: usize, sigma: f64, seed: u64) -> Result<PackingReport> {
    check_common(n, q, sigma)?;
    if q == 1 {
        return domain("q = 1 is trivial: a single affine piece");
    }
    if n < 3 {
        return domain("convex hypotheses need n >= 3");
    }
    let gamma = (sigma * sigma * q as f64 / n as f64).sqrt() / 8.0;
    let sizes: Vec<usize> = (0..q).map(|j| n / q + usize::from(j < n % q)).collect();
    let mut alpha = vec![0.0; q];
    let mut beta = vec![0.0; q];
    for j in 1..q {
        beta[j] = beta[j - 1] + gamma + sizes[j - 1] as f64 * alpha[j - 1];
        alpha[j] = 2.0 * gamma + alpha[j - 1];
    }
    let packing = vg_packing(q, seed)?;
    let hypotheses: Vec<Sequence> = (0..packing.len())
        .into_par_iter()
        .map(|w| {
            let mut u = Vec::with_capacity(n);
            for j in 0..q {
                let lift = packing.bit(w, j + 1) as f64 * gamma;
                for i in 1..=sizes[j] {
                    u.push(lift + alpha[j] * (i - 1) as f64 + beta[j]);
                }
            }
            Sequence::from_vec_unchecked(u)
        })
        .collect();
    let class = ShapeClass::ConvexQPieces { q };
    let class_ok = hypotheses.iter().all(|u| is_convex(u) && is_member(u, &class));
    let max_piece_count = hypotheses
        .iter()
        .map(|u| count_knots_q(u).expect("n >= 3"))
        .max()
        .unwrap_or(0);
    Ok(assemble(
        PatternFamily::Convex,
        n,
        q,
        sigma,
        gamma,
        packing,
        hypotheses,
        class,
        class_ok,
        max_piece_count,
        &sizes,
    ))
}

#[allow(clippy::too_many_arguments)]
fn assemble(
    family: PatternFamily,
    n: usize,
    d: usize,
    sigma: f64,
    gamma: f64,
    packing: BinaryPacking,
    hypotheses: Vec<Sequence>,
    class: ShapeClass,
    class_ok: bool,
    max_piece_count: usize,
    block_sizes: &[usize],
) -> PackingReport {
    let nf = n as f64;
    let s2 = sigma * sigma;
    let m = hypotheses.len();
    // (min separation, worst deviation from the block-weighted Hamming identity)
    let (min_sep, ident_err) = (0..m)
        .into_par_iter()
        .map(|a| {
            let mut local = (f64::INFINITY, 0.0f64);
            for b in a + 1..m {
                let sep = scaled_dist_sq(&hypotheses[a], &hypotheses[b]);
                let predicted: f64 = block_sizes
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| packing.bit(a, j + 1) != packing.bit(b, j + 1))
                    .map(|(_, &s)| gamma * gamma * s as f64 / nf)
                    .sum();
                local.0 = local.0.min(sep);
                local.1 = local.1.max((sep - predicted).abs());
            }
            local
        })
        .reduce(|| (f64::INFINITY, 0.0), |x, y| (x.0.min(y.0), x.1.max(y.1)));
    let null = &hypotheses[0];
    let max_kl = hypotheses
        .iter()
        .map(|u| nf / (2.0 * s2) * scaled_dist_sq(u, null))
        .fold(0.0f64, f64::max);
    let kl_budget = ((packing.len() - 1) as f64).ln() / 16.0;
    let separation_floor = s2 * d as f64 / (512.0 * nf);
    let packing_checks = packing.check();
    PackingReport {
        family,
        n,
        pieces: d,
        sigma,
        gamma,
        packing_checks,
        packing,
        hypotheses,
        class,
        class_ok,
        max_piece_count,
        min_sq_separation: min_sep,
        separation_floor,
        separation_ok: min_sep >= separation_floor,
        separation_identity_error: ident_err,
        max_kl_to_null: max_kl,
        kl_budget,
        budget_ok: max_kl <= kl_budget,
    }
}

/// `⌊(16 n V²/σ²)^{1/3}⌋`, at least 1. The flag is set when `16 n V²/σ² < 1`,
/// where the `σ²/n` term dominates the lower bound.
pub fn corollary_k_choice(v: f64, sigma: f64, n: usize) -> Result<(usize, bool)> {
    if !(sigma > 0.0 && sigma.is_finite()) || !(v > 0.0 && v.is_finite()) || n == 0 {
        return domain("corollary k choice needs positive V, sigma and n");
    }
    let x = 16.0 * n as f64 * v * v / (sigma * sigma);
    if x < 1.0 {
        return Ok((1, true));
    }
    let mut m = x.cbrt().floor() as usize;
    while ((m + 1) as f64).powi(3) <= x {
        m += 1;
    }
    while m > 1 && (m as f64).powi(3) > x {
        m -= 1;
    }
    Ok((m.max(1), false))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn packing_sizes() {
        let p = vg_packing(8, 1).unwrap();
        assert!(p.len() >= 4);
        assert!(p.min_pairwise_distance >= 2);
        assert!(p.check().all());
        assert!(!p.degenerate);
        let p = vg_packing(16, 1).unwrap();
        assert!(p.len() >= 9 && p.min_pairwise_distance >= 3 && p.check().all());
        assert_eq!(p.codewords[0], 0);
    }

    #[test]
    fn small_k() {
        let p = vg_packing(4, 3).unwrap();
        assert!(p.degenerate);
        assert!(p.check().all());
        let p = vg_packing(1, 3).unwrap();
        assert_eq!(p.codewords, vec![0, 1]);
        assert!(p.degenerate);
        assert!(vg_packing(0, 3).is_err());
        assert!(matches!(vg_packing(200, 3), Err(Error::Capacity(_))));
    }

    #[test]
    fn packing_is_deterministic() {
        assert_eq!(vg_packing(24, 9).unwrap(), vg_packing(24, 9).unwrap());
    }

    #[test]
    fn monotone_family() {
        let r = monotone_hypotheses(64, 4, 1.0, 1.0, 0).unwrap();
        assert_eq!(r.gamma, 1.0 / 32.0);
        assert!((r.separation_floor - 1.220_703_125e-4).abs() < 1e-18);
        assert!(r.all_ok(), "{r:?}");
        assert!(r.separation_identity_error < 1e-12);
        assert!(r.max_piece_count <= 4);
        assert!(monotone_hypotheses(64, 16, 1.0, 1.0, 0).is_err());
    }

    #[test]
    fn convex_recursion() {
        let r = convex_hypotheses(8, 2, 1.0, 0).unwrap();
        assert_eq!(r.gamma, 1.0 / 16.0);
        for u in &r.hypotheses {
            assert!(is_convex(u));
        }
        assert!(r.separation_identity_error < 1e-12);
        assert!(r.budget_ok && r.separation_ok);
        assert!(convex_hypotheses(8, 1, 1.0, 0).is_err());
    }

    #[test]
    fn convex_junctions_add_kinks() {
        // both second differences at a junction are γ when ω_j = ω_{j+1}
        let r = convex_hypotheses(8, 2, 1.0, 0).unwrap();
        let zero = &r.hypotheses[0];
        assert_eq!(count_knots_q(zero).unwrap(), 3);
    }

    #[test]
    fn corollary_choice() {
        assert_eq!(corollary_k_choice(1.0, 1.0, 64).unwrap(), (10, false));
        assert_eq!(corollary_k_choice(0.01, 1.0, 64).unwrap(), (1, true));
        for n in 1..200 {
            let (k, flag) = corollary_k_choice(0.7, 1.3, n).unwrap();
            if !flag {
                assert!((k as f64).powi(3) <= 16.0 * n as f64 * 0.49 / 1.69);
            }
        }
    }
}
