use std::collections::BTreeMap;

use serde::ser::SerializeSeq;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{domain, Error, Result};
use crate::projection::{block_means_into, log_prior, ConvexProjector};
use crate::qagg::dictionary::{Dictionary, DictionaryMode};
use crate::seq::{scaled_dot, scaled_norm_sq, Pattern, PatternFamily, Sequence};

/// Largest `patterns × n` table the enumeration oracle will hold.
const ENUMERATION_MAX_ENTRIES: u128 = 1 << 25;
const INNER_MAX_STEPS: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QAggConfig {
    /// Target Frank–Wolfe duality gap.
    pub tol: f64,
    /// Outer iteration budget.
    pub max_iter: usize,
    /// Multiplier of `σ²/n · log(1/π_J)` in the penalty.
    pub penalty_constant: f64,
    /// Scan the dictionary instead of using the segmentation oracle, even when
    /// the latter applies. Slow; meant for cross-checks.
    pub force_enumeration: bool,
}

impl Default for QAggConfig {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 100_000,
            penalty_constant: 46.0,
            force_enumeration: false,
        }
    }
}

/// Sparse weights on the simplex, keyed by pattern.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SimplexWeights {
    entries: BTreeMap<Pattern, f64>,
}

impl SimplexWeights {
    pub fn vertex(p: Pattern) -> Self {
        Self {
            entries: BTreeMap::from([(p, 1.0)]),
        }
    }

    /// Builds weights from `(pattern, weight)` pairs; repeated patterns add up.
    pub fn from_entries(entries: impl IntoIterator<Item = (Pattern, f64)>) -> Result<Self> {
        let mut map: BTreeMap<Pattern, f64> = BTreeMap::new();
        for (p, w) in entries {
            if !(w >= 0.0 && w.is_finite()) {
                return domain(format!("simplex weight must be non-negative, got {w}"));
            }
            if w > 0.0 {
                *map.entry(p).or_insert(0.0) += w;
            }
        }
        let s: f64 = map.values().sum();
        if (s - 1.0).abs() > 1e-10 {
            return domain(format!("simplex weights sum to {s}, not 1"));
        }
        Ok(Self { entries: map })
    }

    pub fn get(&self, p: &Pattern) -> f64 {
        self.entries.get(p).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Pattern, f64)> {
        self.entries.iter().map(|(p, &w)| (p, w))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.entries.values().sum()
    }

    /// Entries with weight above `threshold`, heaviest first.
    pub fn support(&self, threshold: f64) -> Vec<(Pattern, f64)> {
        let mut v: Vec<(Pattern, f64)> = self
            .entries
            .iter()
            .filter(|(_, &w)| w > threshold)
            .map(|(p, &w)| (p.clone(), w))
            .collect();
        v.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        v
    }
}

impl Serialize for SimplexWeights {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Entry<'a> {
            pattern: &'a Pattern,
            weight: f64,
        }
        let mut seq = s.serialize_seq(Some(self.entries.len()))?;
        for (p, &w) in &self.entries {
            seq.serialize_element(&Entry { pattern: p, weight: w })?;
        }
        seq.end()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct QAggSolution {
    pub weights: SimplexWeights,
    pub estimate: Sequence,
    pub objective_value: f64,
    pub dual_gap: f64,
    pub iterations: usize,
    /// Objective after each outer iteration.
    pub objective_trace: Vec<f64>,
}

/// Penalty `2σ²|J|/n + (C σ²/n) log(1/π_J)` indexed by cardinality.
fn penalty_table(family: PatternFamily, n: usize, sigma: f64, constant: f64, max_card: usize) -> Vec<f64> {
    let s2n = sigma * sigma / n as f64;
    (0..=max_card)
        .map(|c| 2.0 * s2n * c as f64 - constant * s2n * log_prior(family, c, n))
        .collect()
}

fn project(family: PatternFamily, y: &[f64], p: &Pattern) -> Result<Vec<f64>> {
    match family {
        PatternFamily::Monotone => {
            let mut out = vec![0.0; y.len()];
            block_means_into(y, p.indices(), &mut out);
            Ok(out)
        }
        PatternFamily::Convex => Ok(ConvexProjector::new(y.len(), p)?.project(y)),
    }
}

/// The Q-aggregation objective
/// `‖μ_θ - y‖² + Σ_J θ_J (2σ²|J|/n + ½‖μ_θ - P_J y‖² + (C σ²/n) log(1/π_J))`,
/// evaluated directly from its definition.
pub fn qagg_objective(
    theta: &SimplexWeights,
    y: &Sequence,
    sigma: f64,
    dict: &Dictionary,
    penalty_constant: f64,
) -> Result<f64> {
    let n = y.len();
    if n != dict.n() {
        return domain(format!(
            "sequence length {n} does not match dictionary n = {}",
            dict.n()
        ));
    }
    let mut fits = Vec::with_capacity(theta.len());
    let mut mu = vec![0.0; n];
    for (p, w) in theta.iter() {
        if !dict.contains(p) {
            return domain(format!("pattern {p} is not in the dictionary"));
        }
        let f = project(dict.family(), y, p)?;
        for (m, v) in mu.iter_mut().zip(&f) {
            *m += w * v;
        }
        fits.push((p, w, f));
    }
    let s2n = sigma * sigma / n as f64;
    let mut total = crate::seq::scaled_dist_sq(&mu, y);
    for (p, w, f) in &fits {
        let pen = 2.0 * s2n * p.len() as f64 - penalty_constant * s2n * dict.log_prior(p);
        total += w * (pen + 0.5 * crate::seq::scaled_dist_sq(&mu, f));
    }
    Ok(total)
}

/// Linear minimisation over the dictionary of
/// `⟨v, f_J⟩ + pen_J - 2⟨f_J, y⟩ + w‖f_J‖²`.
enum Oracle<'a> {
    /// Exact dynamic programme over segmentations; valid for monotone
    /// dictionaries holding every pattern up to a cardinality.
    Segments {
        y: &'a [f64],
        pen: &'a [f64],
        max_blocks: usize,
    },
    Scan(Scan),
}

struct Scan {
    n: usize,
    patterns: Vec<Pattern>,
    fits: Vec<f64>,
    /// `pen_J - 2⟨f_J, y⟩`
    lin: Vec<f64>,
    /// `‖f_J‖²`
    sq: Vec<f64>,
}

impl Oracle<'_> {
    fn argmin(&self, v: Option<&[f64]>, w: f64) -> Pattern {
        match self {
            Oracle::Segments { y, pen, max_blocks } => segment_argmin(y, v, w, pen, *max_blocks),
            Oracle::Scan(s) => {
                let mut best = (f64::INFINITY, 0usize);
                for i in 0..s.patterns.len() {
                    let f = &s.fits[i * s.n..(i + 1) * s.n];
                    let mut score = s.lin[i] + w * s.sq[i];
                    if let Some(v) = v {
                        score += scaled_dot(v, f);
                    }
                    if score < best.0 {
                        best = (score, i);
                    }
                }
                s.patterns[best.1].clone()
            }
        }
    }
}

fn segment_argmin(y: &[f64], v: Option<&[f64]>, w: f64, pen: &[f64], max_blocks: usize) -> Pattern {
    let n = y.len();
    let nf = n as f64;
    let mut py = vec![0.0; n + 1];
    let mut pv = vec![0.0; n + 1];
    for i in 0..n {
        py[i + 1] = py[i] + y[i];
        pv[i + 1] = pv[i] + v.map_or(0.0, |v| v[i]);
    }
    let cost = |s: usize, e: usize| {
        let len = (e - s) as f64;
        let my = (py[e] - py[s]) / len;
        let mv = (pv[e] - pv[s]) / len;
        len / nf * (mv * my + (w - 2.0) * my * my)
    };
    let kmax = max_blocks.min(n);
    // best[b][e]: b + 1 blocks covering the first e points
    let mut best = vec![vec![f64::INFINITY; n + 1]; kmax];
    let mut back = vec![vec![0usize; n + 1]; kmax];
    for e in 1..=n {
        best[0][e] = cost(0, e);
    }
    for b in 1..kmax {
        for e in b + 1..=n {
            let mut m = (f64::INFINITY, 0);
            for s in b..e {
                let c = best[b - 1][s] + cost(s, e);
                if c < m.0 {
                    m = (c, s);
                }
            }
            best[b][e] = m.0;
            back[b][e] = m.1;
        }
    }
    let mut choice = (f64::INFINITY, 0usize);
    for (b, row) in best.iter().enumerate() {
        let total = row[n] + pen[b];
        if total < choice.0 {
            choice = (total, b);
        }
    }
    let mut jumps = Vec::with_capacity(choice.1);
    let (mut b, mut e) = (choice.1, n);
    while b > 0 {
        let s = back[b][e];
        jumps.push(s);
        e = s;
        b -= 1;
    }
    jumps.reverse();
    Pattern::from_sorted_unchecked(jumps, 1, n - 1)
}

struct Atom {
    pattern: Pattern,
    fit: Vec<f64>,
    /// `pen_J + ½‖f_J‖² - 2⟨f_J, y⟩`
    lin: f64,
}

/// Minimises the Q-aggregation objective over the simplex spanned by the
/// dictionary.
///
/// Pairwise Frank–Wolfe: each outer iteration recomputes `μ_θ` and the
/// gradient exactly, calls the linear oracle, adds the best vertex to the
/// active set and re-optimises over the active set by pairwise exchanges
/// with exact line search. `y` is centred first; every projector fixes
/// constants so the solution shifts back exactly.
pub fn solve_qagg(y: &Sequence, sigma: f64, dict: &Dictionary, cfg: &QAggConfig) -> Result<QAggSolution> {
    let n = y.len();
    if n != dict.n() {
        return domain(format!(
            "sequence length {n} does not match dictionary n = {}",
            dict.n()
        ));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return domain(format!("sigma must be positive, got {sigma}"));
    }
    if !(cfg.tol > 0.0) || cfg.max_iter == 0 {
        return domain("tolerance and iteration budget must be positive");
    }
    if !(cfg.penalty_constant >= 0.0 && cfg.penalty_constant.is_finite()) {
        return domain("penalty constant must be non-negative");
    }
    let family = dict.family();
    let mean = y.mean();
    let yc: Vec<f64> = y.iter().map(|v| v - mean).collect();
    let y_sq = scaled_norm_sq(&yc);
    // gaps below this are rounding noise for badly scaled data
    let tol = cfg.tol.max(1e-13 * y_sq);
    let pen = penalty_table(family, n, sigma, cfg.penalty_constant, dict.max_cardinality());

    let oracle = if family == PatternFamily::Monotone && dict.is_cardinality_complete() && !cfg.force_enumeration {
        Oracle::Segments {
            y: &yc,
            pen: &pen,
            max_blocks: dict.max_cardinality() + 1,
        }
    } else {
        Oracle::Scan(build_scan(dict, &yc, &pen)?)
    };

    let make_atom = |p: Pattern| -> Result<Atom> {
        let fit = project(family, &yc, &p)?;
        let lin = pen[p.len()] + 0.5 * scaled_norm_sq(&fit) - 2.0 * scaled_dot(&fit, &yc);
        Ok(Atom { pattern: p, fit, lin })
    };

    let mut atoms = vec![make_atom(oracle.argmin(None, 1.0))?];
    let mut theta = vec![1.0];
    let mut trace = Vec::new();
    let mut mu = vec![0.0; n];
    let mut gap = f64::INFINITY;

    for iter in 1..=cfg.max_iter {
        recompute_mu(&atoms, &theta, &mut mu);
        let mut g: Vec<f64> = atoms.iter().map(|a| scaled_dot(&mu, &a.fit) + a.lin).collect();
        let objective =
            y_sq + 0.5 * scaled_norm_sq(&mu) + theta.iter().zip(&atoms).map(|(t, a)| t * a.lin).sum::<f64>();
        trace.push(objective);

        let star = oracle.argmin(Some(&mu), 0.5);
        let star_idx = match atoms.iter().position(|a| a.pattern == star) {
            Some(i) => i,
            None => {
                let atom = make_atom(star)?;
                g.push(scaled_dot(&mu, &atom.fit) + atom.lin);
                atoms.push(atom);
                theta.push(0.0);
                atoms.len() - 1
            }
        };
        let weighted: f64 = theta.iter().zip(&g).map(|(t, gi)| t * gi).sum();
        gap = (weighted - g[star_idx]).max(0.0);
        if gap <= tol {
            log::debug!("q-aggregation converged: gap {gap:e} after {iter} iterations");
            return Ok(finish(atoms, theta, mean, n, objective, gap, iter, trace));
        }

        pairwise_phase(&atoms, &mut theta, &mut g, &mut mu, tol * 0.1);

        let mut keep = theta.iter().map(|&t| t > 0.0);
        atoms.retain(|_| keep.next().unwrap_or(false));
        theta.retain(|&t| t > 0.0);
    }

    recompute_mu(&atoms, &theta, &mut mu);
    let objective = y_sq + 0.5 * scaled_norm_sq(&mu) + theta.iter().zip(&atoms).map(|(t, a)| t * a.lin).sum::<f64>();
    let best = finish(atoms, theta, mean, n, objective, gap, cfg.max_iter, trace);
    Err(Error::QAggConvergence {
        gap,
        iterations: cfg.max_iter,
        best: Box::new(best),
    })
}

fn build_scan(dict: &Dictionary, yc: &[f64], pen: &[f64]) -> Result<Scan> {
    let n = dict.n();
    let len = dict.len();
    if len.saturating_mul(n as u128) > ENUMERATION_MAX_ENTRIES {
        return Err(Error::Capacity(format!(
            "scanning {len} patterns of length {n} exceeds the enumeration budget; use a smaller dictionary"
        )));
    }
    let patterns = dict.patterns()?;
    let mut fits = vec![0.0; patterns.len() * n];
    match dict.family() {
        PatternFamily::Monotone => {
            for (p, out) in patterns.iter().zip(fits.chunks_mut(n)) {
                block_means_into(yc, p.indices(), out);
            }
        }
        PatternFamily::Convex => {
            let projectors = dict.convex_projectors()?;
            for (proj, out) in projectors.iter().zip(fits.chunks_mut(n)) {
                proj.project_into(yc, out);
            }
        }
    }
    let mut lin = Vec::with_capacity(patterns.len());
    let mut sq = Vec::with_capacity(patterns.len());
    for (p, f) in patterns.iter().zip(fits.chunks(n)) {
        lin.push(pen[p.len()] - 2.0 * scaled_dot(f, yc));
        sq.push(scaled_norm_sq(f));
    }
    Ok(Scan {
        n,
        patterns,
        fits,
        lin,
        sq,
    })
}

fn recompute_mu(atoms: &[Atom], theta: &[f64], mu: &mut [f64]) {
    mu.fill(0.0);
    for (a, &t) in atoms.iter().zip(theta) {
        for (m, f) in mu.iter_mut().zip(&a.fit) {
            *m += t * f;
        }
    }
}

/// Pairwise exchanges between the worst weighted atom and the best atom,
/// with exact line search, until their gradient gap drops below `tol`.
fn pairwise_phase(atoms: &[Atom], theta: &mut [f64], g: &mut [f64], mu: &mut [f64], tol: f64) {
    let n = mu.len();
    let mut d = vec![0.0; n];
    for _ in 0..INNER_MAX_STEPS {
        let mut t = 0;
        let mut a: Option<usize> = None;
        for i in 0..atoms.len() {
            if g[i] < g[t] {
                t = i;
            }
            if theta[i] > 0.0 && a.is_none_or(|j| g[i] > g[j]) {
                a = Some(i);
            }
        }
        let Some(a) = a else { return };
        let slope = g[a] - g[t];
        if slope <= tol || a == t {
            return;
        }
        for (di, (ft, fa)) in d.iter_mut().zip(atoms[t].fit.iter().zip(&atoms[a].fit)) {
            *di = ft - fa;
        }
        let curvature = scaled_norm_sq(&d);
        let step = if curvature > 0.0 {
            (slope / curvature).min(theta[a])
        } else {
            theta[a]
        };
        if step <= 0.0 {
            return;
        }
        theta[t] += step;
        if step == theta[a] {
            theta[a] = 0.0;
        } else {
            theta[a] -= step;
        }
        for (m, di) in mu.iter_mut().zip(&d) {
            *m += step * di;
        }
        for (gi, atom) in g.iter_mut().zip(atoms) {
            *gi += step * scaled_dot(&d, &atom.fit);
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn finish(
    atoms: Vec<Atom>,
    mut theta: Vec<f64>,
    mean: f64,
    n: usize,
    objective: f64,
    gap: f64,
    iterations: usize,
    trace: Vec<f64>,
) -> QAggSolution {
    for t in theta.iter_mut() {
        *t = t.max(0.0);
    }
    let s: f64 = theta.iter().sum();
    for t in theta.iter_mut() {
        *t /= s;
    }
    let mut mu = vec![0.0; n];
    recompute_mu(&atoms, &theta, &mut mu);
    let estimate: Vec<f64> = mu.iter().map(|m| m + mean).collect();
    let mut entries = BTreeMap::new();
    for (a, t) in atoms.into_iter().zip(theta) {
        if t > 0.0 {
            *entries.entry(a.pattern).or_insert(0.0) += t;
        }
    }
    QAggSolution {
        weights: SimplexWeights { entries },
        estimate: Sequence::from_vec_unchecked(estimate),
        objective_value: objective,
        dual_gap: gap,
        iterations,
        objective_trace: trace,
    }
}

/// Q-aggregation over every jump set.
pub fn qagg_estimate_monotone(y: &Sequence, sigma: f64, cfg: &QAggConfig) -> Result<QAggSolution> {
    let dict = Dictionary::build(PatternFamily::Monotone, y.len(), DictionaryMode::Exhaustive)?;
    solve_qagg(y, sigma, &dict, cfg)
}

/// Q-aggregation over every knot set.
pub fn qagg_estimate_convex(y: &Sequence, sigma: f64, cfg: &QAggConfig) -> Result<QAggSolution> {
    let dict = Dictionary::build(PatternFamily::Convex, y.len(), DictionaryMode::Exhaustive)?;
    solve_qagg(y, sigma, &dict, cfg)
}
