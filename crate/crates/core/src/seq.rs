//! Sequences, sparsity patterns and shape classes.
//!
//! Indices are 1-based wherever they cross the public API: a monotone pattern
//! index `i` marks a jump between positions `i` and `i + 1`, a convex pattern
//! index `i` marks a kink at interior position `i`.

use std::fmt;
use std::io::{BufRead, Write};
use std::ops::Deref;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// A finite, non-empty vector of reals (a mean vector, an observation or an
/// estimate). Length is fixed at construction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Sequence(Vec<f64>);

impl Sequence {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return domain("sequence must have at least one entry");
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return domain(format!("entry {} is not finite ({})", i + 1, values[i]));
        }
        Ok(Self(values))
    }

    /// Builds a sequence from values the caller guarantees to be finite and non-empty.
    pub(crate) fn from_vec_unchecked(values: Vec<f64>) -> Self {
        debug_assert!(!values.is_empty() && values.iter().all(|v| v.is_finite()));
        Self(values)
    }

    pub fn zeros(n: usize) -> Result<Self> {
        Self::constant(n, 0.0)
    }

    pub fn constant(n: usize, c: f64) -> Result<Self> {
        Self::new(vec![c; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// Componentwise `self + other`.
    pub fn add(&self, other: &Sequence) -> Result<Sequence> {
        check_same_len(self, other)?;
        Sequence::new(self.iter().zip(other.iter()).map(|(a, b)| a + b).collect())
    }

    /// Componentwise `self - other`.
    pub fn sub(&self, other: &Sequence) -> Result<Sequence> {
        check_same_len(self, other)?;
        Sequence::new(self.iter().zip(other.iter()).map(|(a, b)| a - b).collect())
    }

    pub fn scale(&self, a: f64) -> Result<Sequence> {
        Sequence::new(self.iter().map(|v| a * v).collect())
    }

    pub fn shift(&self, c: f64) -> Result<Sequence> {
        Sequence::new(self.iter().map(|v| v + c).collect())
    }

    pub fn mean(&self) -> f64 {
        self.0.iter().sum::<f64>() / self.0.len() as f64
    }
}

impl Deref for Sequence {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for Sequence {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Sequence::new(v)
    }
}

impl From<Sequence> for Vec<f64> {
    fn from(s: Sequence) -> Self {
        s.0
    }
}

fn check_same_len(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return domain(format!("length mismatch: {} vs {}", a.len(), b.len()));
    }
    Ok(())
}

/// Which index domain a [`Pattern`] lives on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatternFamily {
    /// Jump sets `J ⊆ {1, ..., n-1}`.
    Monotone,
    /// Knot sets `J ⊆ {2, ..., n-1}`.
    Convex,
}

impl PatternFamily {
    /// Inclusive 1-based index range for sequences of length `n`.
    pub fn domain(self, n: usize) -> (usize, usize) {
        match self {
            PatternFamily::Monotone => (1, n.saturating_sub(1)),
            PatternFamily::Convex => (2, n.saturating_sub(1)),
        }
    }

    /// Number of admissible indices for length `n`.
    pub fn slots(self, n: usize) -> usize {
        let (lo, hi) = self.domain(n);
        if hi >= lo {
            hi - lo + 1
        } else {
            0
        }
    }

    pub fn min_len(self) -> usize {
        match self {
            PatternFamily::Monotone => 2,
            PatternFamily::Convex => 3,
        }
    }
}

impl fmt::Display for PatternFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PatternFamily::Monotone => f.write_str("monotone"),
            PatternFamily::Convex => f.write_str("convex"),
        }
    }
}

/// A sorted set of 1-based interior indices within an inclusive domain.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Pattern {
    indices: Vec<usize>,
    lo: usize,
    hi: usize,
}

impl Pattern {
    pub fn new(indices: Vec<usize>, lo: usize, hi: usize) -> Result<Self> {
        for w in indices.windows(2) {
            if w[0] >= w[1] {
                return domain(format!(
                    "pattern indices must be strictly increasing, got {} then {}",
                    w[0], w[1]
                ));
            }
        }
        if let Some(&bad) = indices.iter().find(|&&i| i < lo || i > hi) {
            return domain(format!("pattern index {bad} outside {{{lo}, ..., {hi}}}"));
        }
        Ok(Self { indices, lo, hi })
    }

    /// A pattern in the index domain of `family` for sequences of length `n`.
    /// Unsorted input is sorted; duplicates are rejected.
    pub fn for_family(family: PatternFamily, n: usize, mut indices: Vec<usize>) -> Result<Self> {
        if n < family.min_len() {
            return domain(format!("{family} patterns need n >= {}", family.min_len()));
        }
        indices.sort_unstable();
        let (lo, hi) = family.domain(n);
        Self::new(indices, lo, hi)
    }

    pub fn monotone(n: usize, indices: Vec<usize>) -> Result<Self> {
        Self::for_family(PatternFamily::Monotone, n, indices)
    }

    pub fn convex(n: usize, indices: Vec<usize>) -> Result<Self> {
        Self::for_family(PatternFamily::Convex, n, indices)
    }

    pub(crate) fn from_sorted_unchecked(indices: Vec<usize>, lo: usize, hi: usize) -> Self {
        Self { indices, lo, hi }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    /// Cardinality `|J|`.
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn domain(&self) -> (usize, usize) {
        (self.lo, self.hi)
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.binary_search(&i).is_ok()
    }

    pub fn is_subset_of(&self, other: &Pattern) -> bool {
        self.indices.iter().all(|&i| other.contains(i))
    }

    /// Checks that the pattern's domain matches `family` at length `n`.
    pub fn check(&self, family: PatternFamily, n: usize) -> Result<()> {
        if n < family.min_len() {
            return domain(format!("{family} patterns need n >= {}", family.min_len()));
        }
        let (lo, hi) = family.domain(n);
        if let Some(&bad) = self.indices.iter().find(|&&i| i < lo || i > hi) {
            return domain(format!(
                "index {bad} is not a valid {family} index for n = {n} (allowed {{{lo}, ..., {hi}}})"
            ));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.indices).expect("integer arrays always serialize")
    }

    pub fn from_json(family: PatternFamily, n: usize, text: &str) -> Result<Self> {
        let indices: Vec<usize> = serde_json::from_str(text)?;
        Self::for_family(family, n, indices)
    }
}

impl Serialize for Pattern {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.indices.serialize(s)
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (j, i) in self.indices.iter().enumerate() {
            if j > 0 {
                write!(f, ",")?;
            }
            write!(f, "{i}")?;
        }
        write!(f, "}}")
    }
}

/// Shape classes used as oracle comparators and membership predicates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ShapeClass {
    /// Non-decreasing sequences.
    Monotone,
    /// Non-decreasing sequences with `u_n - u_1 <= v`.
    MonotoneBoundedV { v: f64 },
    /// Non-decreasing sequences with at most `k` constant pieces.
    MonotoneKPieces { k: usize },
    /// Sequences with non-negative second differences.
    Convex,
    /// Convex sequences with at most `q` linear pieces.
    ConvexQPieces { q: usize },
}

impl ShapeClass {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ShapeClass::MonotoneBoundedV { v } if !(v > 0.0 && v.is_finite()) => {
                domain(format!("variation bound must be positive, got {v}"))
            }
            ShapeClass::MonotoneKPieces { k: 0 } => domain("k must be positive"),
            ShapeClass::ConvexQPieces { q: 0 } => domain("q must be positive"),
            _ => Ok(()),
        }
    }

    pub fn family(&self) -> PatternFamily {
        match self {
            ShapeClass::Convex | ShapeClass::ConvexQPieces { .. } => PatternFamily::Convex,
            _ => PatternFamily::Monotone,
        }
    }
}

impl fmt::Display for ShapeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ShapeClass::Monotone => write!(f, "monotone"),
            ShapeClass::MonotoneBoundedV { v } => write!(f, "monotone(V<={v})"),
            ShapeClass::MonotoneKPieces { k } => write!(f, "monotone(k<={k})"),
            ShapeClass::Convex => write!(f, "convex"),
            ShapeClass::ConvexQPieces { q } => write!(f, "convex(q<={q})"),
        }
    }
}

/// `(1/n) Σ u_i²`.
pub fn scaled_norm_sq(u: &[f64]) -> f64 {
    u.iter().map(|v| v * v).sum::<f64>() / u.len() as f64
}

/// `(1/n) Σ (a_i - b_i)²`.
pub fn scaled_dist_sq(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64
}

/// `(1/n) Σ a_i b_i`.
pub fn scaled_dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / a.len() as f64
}

/// Number of constant pieces: one plus the number of positions with
/// `u_i != u_{i+1}` (exact comparison).
pub fn count_pieces_k(u: &[f64]) -> usize {
    1 + u.windows(2).filter(|w| w[0] != w[1]).count()
}

/// Like [`count_pieces_k`] but treats changes of magnitude `<= tol` as ties.
pub fn count_pieces_k_tol(u: &[f64], tol: f64) -> usize {
    1 + u.windows(2).filter(|w| (w[1] - w[0]).abs() > tol).count()
}

/// Number of linear pieces: one plus the number of interior positions where
/// `2u_i != u_{i-1} + u_{i+1}` (exact comparison).
pub fn count_knots_q(u: &[f64]) -> Result<usize> {
    if u.len() < 3 {
        return domain(format!("q(u) needs n >= 3, got n = {}", u.len()));
    }
    Ok(1 + u.windows(3).filter(|w| 2.0 * w[1] != w[0] + w[2]).count())
}

/// Like [`count_knots_q`] with second differences of magnitude `<= tol` treated as zero.
pub fn count_knots_q_tol(u: &[f64], tol: f64) -> Result<usize> {
    if u.len() < 3 {
        return domain(format!("q(u) needs n >= 3, got n = {}", u.len()));
    }
    Ok(1 + u.windows(3).filter(|w| (w[0] + w[2] - 2.0 * w[1]).abs() > tol).count())
}

/// `u_n - u_1`. Meaningful as a variation only for monotone input.
pub fn total_variation_v(u: &[f64]) -> f64 {
    u[u.len() - 1] - u[0]
}

pub fn is_monotone(u: &[f64]) -> bool {
    u.windows(2).all(|w| w[0] <= w[1])
}

pub fn is_convex(u: &[f64]) -> bool {
    u.windows(3).all(|w| 2.0 * w[1] <= w[0] + w[2])
}

/// Convexity with second differences down to `-tol` accepted.
pub fn is_convex_tol(u: &[f64], tol: f64) -> bool {
    u.windows(3).all(|w| w[0] + w[2] - 2.0 * w[1] >= -tol)
}

/// Exact membership predicate.
pub fn is_member(u: &[f64], class: &ShapeClass) -> bool {
    match *class {
        ShapeClass::Monotone => is_monotone(u),
        ShapeClass::MonotoneBoundedV { v } => is_monotone(u) && total_variation_v(u) <= v,
        ShapeClass::MonotoneKPieces { k } => is_monotone(u) && count_pieces_k(u) <= k,
        ShapeClass::Convex => is_convex(u),
        ShapeClass::ConvexQPieces { q } => is_convex(u) && (u.len() < 3 || count_knots_q(u).map_or(false, |c| c <= q)),
    }
}

/// `β_1 = u_1`, `β_i = u_i - u_{i-1}`.
pub fn to_increments(u: &Sequence) -> Sequence {
    let mut out = Vec::with_capacity(u.len());
    out.push(u[0]);
    out.extend(u.windows(2).map(|w| w[1] - w[0]));
    Sequence::from_vec_unchecked(out)
}

/// Cumulative sum; inverse of [`to_increments`].
pub fn from_increments(b: &Sequence) -> Sequence {
    let mut acc = 0.0;
    let out = b
        .iter()
        .map(|v| {
            acc += v;
            acc
        })
        .collect();
    Sequence::from_vec_unchecked(out)
}

/// Parses a sequence from CSV text (header `value`, one number per line).
/// The header may be omitted.
pub fn parse_csv(text: &str) -> Result<Sequence> {
    let mut values = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        if lineno == 0 && t.eq_ignore_ascii_case("value") {
            continue;
        }
        let v: f64 = t
            .parse()
            .map_err(|_| Error::Domain(format!("line {}: cannot parse {t:?} as a number", lineno + 1)))?;
        values.push(v);
    }
    Sequence::new(values)
}

pub fn to_csv(u: &[f64]) -> String {
    let mut s = String::from("value\n");
    for v in u {
        s.push_str(&format!("{v}\n"));
    }
    s
}

/// Reads a sequence from `.json` (array of numbers) or CSV (anything else).
pub fn read_sequence(path: &Path) -> Result<Sequence> {
    let text = std::fs::read_to_string(path)?;
    let parsed = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
        serde_json::from_str::<Vec<f64>>(&text)
            .map_err(Error::from)
            .and_then(Sequence::new)
    } else {
        parse_csv(&text)
    };
    parsed.map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })
}

/// Writes CSV, or a JSON array when the extension is `.json`.
pub fn write_sequence(path: &Path, u: &[f64]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
        serde_json::to_writer(&mut f, u)?;
        writeln!(f)?;
    } else {
        f.write_all(to_csv(u).as_bytes())?;
    }
    f.flush()?;
    Ok(())
}

/// Reads CSV from any buffered reader (used for stdin).
pub fn read_csv_from<R: BufRead>(mut r: R) -> Result<Sequence> {
    let mut text = String::new();
    r.read_to_string(&mut text)?;
    parse_csv(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: &[f64]) -> Sequence {
        Sequence::new(v.to_vec()).unwrap()
    }

    #[test]
    fn norm_examples() {
        assert_eq!(scaled_norm_sq(&s(&[0.0; 4])), 0.0);
        assert_eq!(scaled_norm_sq(&s(&[2.0; 4])), 4.0);
        assert!((scaled_norm_sq(&s(&[1.0, 2.0, 3.0])) - 4.666_666_666_666_667).abs() < 1e-15);
    }

    #[test]
    fn empty_and_nonfinite_rejected() {
        assert!(matches!(Sequence::new(vec![]), Err(Error::Domain(_))));
        assert!(Sequence::new(vec![1.0, f64::NAN]).is_err());
        assert!(Sequence::new(vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn piece_counts() {
        assert_eq!(count_pieces_k(&[5.0, 5.0, 5.0]), 1);
        assert_eq!(count_pieces_k(&[1.0, 2.0, 2.0, 3.0]), 3);
        assert_eq!(count_pieces_k(&[1.0, 1.0 + 1e-15, 1.0]), 3);
        assert_eq!(count_pieces_k_tol(&[1.0, 1.0 + 1e-15, 1.0], 1e-12), 1);
    }

    #[test]
    fn knot_counts() {
        assert_eq!(count_knots_q(&[0.0, 1.0, 2.0, 3.0]).unwrap(), 1);
        assert_eq!(count_knots_q(&[0.0, 0.0, 1.0, 2.0]).unwrap(), 2);
        assert_eq!(count_knots_q(&[1.0, 0.0, 1.0, 0.0]).unwrap(), 3);
        assert!(count_knots_q(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn variation() {
        assert_eq!(total_variation_v(&[3.0, 3.0, 3.0]), 0.0);
        assert_eq!(total_variation_v(&[0.0, 1.0, 4.0]), 4.0);
        assert_eq!(total_variation_v(&[4.0, 1.0, 0.0]), -4.0);
    }

    #[test]
    fn membership() {
        assert!(is_member(&[1.0, 2.0, 3.0], &ShapeClass::Monotone));
        assert!(!is_member(&[0.0, 2.0, 1.0], &ShapeClass::Convex));
        assert!(is_member(&[0.0, 1.0, 1.0, 2.0], &ShapeClass::MonotoneKPieces { k: 3 }));
        assert!(!is_member(&[0.0, 1.0, 1.0, 2.0], &ShapeClass::MonotoneKPieces { k: 2 }));
        assert!(is_member(&[0.0, 1.0, 3.0], &ShapeClass::MonotoneBoundedV { v: 3.0 }));
        assert!(!is_member(&[0.0, 1.0, 3.0], &ShapeClass::MonotoneBoundedV { v: 2.5 }));
        assert!(!is_member(&[3.0, 1.0, 3.5], &ShapeClass::MonotoneBoundedV { v: 10.0 }));
        assert!(is_member(&[1.0, 0.0, 0.0, 1.0], &ShapeClass::ConvexQPieces { q: 3 }));
        assert!(!is_member(&[1.0, 0.0, 0.0, 1.0], &ShapeClass::ConvexQPieces { q: 2 }));
    }

    #[test]
    fn increments() {
        assert_eq!(to_increments(&s(&[2.0, 2.0, 5.0])).as_slice(), &[2.0, 0.0, 3.0]);
        assert_eq!(from_increments(&s(&[2.0, 0.0, 3.0])).as_slice(), &[2.0, 2.0, 5.0]);
    }

    #[test]
    fn pattern_validation() {
        let p = Pattern::monotone(5, vec![3, 1]).unwrap();
        assert_eq!(p.indices(), &[1, 3]);
        assert!(Pattern::monotone(5, vec![5]).is_err());
        assert!(Pattern::monotone(5, vec![2, 2]).is_err());
        assert!(Pattern::convex(5, vec![1]).is_err());
        assert!(Pattern::convex(5, vec![2, 4]).is_ok());
        assert!(p.check(PatternFamily::Monotone, 3).is_err());
        assert_eq!(p.to_json(), "[1,3]");
        assert_eq!(Pattern::from_json(PatternFamily::Monotone, 5, "[1,3]").unwrap(), p);
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let u = s(&[0.1, -2.5e-300, 1.0 / 3.0, 7.0]);
        let back = parse_csv(&to_csv(&u)).unwrap();
        assert_eq!(back, u);
        assert_eq!(parse_csv("1\n2\n").unwrap().as_slice(), &[1.0, 2.0]);
        assert!(parse_csv("value\nabc\n").is_err());
        assert!(parse_csv("value\n").is_err());
    }

    #[test]
    fn json_serde() {
        let u = s(&[1.0, 2.5]);
        let text = serde_json::to_string(&u).unwrap();
        assert_eq!(text, "[1.0,2.5]");
        let back: Sequence = serde_json::from_str(&text).unwrap();
        assert_eq!(back, u);
        assert!(serde_json::from_str::<Sequence>("[]").is_err());
    }
}
