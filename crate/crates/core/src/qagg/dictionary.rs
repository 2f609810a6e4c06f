use std::collections::BTreeSet;
use std::sync::OnceLock;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::projection::{log_prior, ConvexProjector};
use crate::seq::{Pattern, PatternFamily};

/// Largest `n` for which the full power set may be requested.
pub const EXHAUSTIVE_MAX_N: usize = 21;

/// Largest number of patterns a dictionary will materialise.
pub const MATERIALIZE_MAX: u128 = 1 << 22;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum DictionaryMode {
    Exhaustive,
    /// Every pattern with at most `m` indices.
    MaxCardinality {
        m: usize,
    },
    /// The empty pattern plus uniformly drawn subsets, `count` in total.
    Sampled {
        count: usize,
        seed: u64,
    },
}

impl std::str::FromStr for DictionaryMode {
    type Err = Error;

    /// Parses `exhaustive`, `maxcard=M` or `sampled=COUNT:SEED`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("exhaustive") {
            return Ok(Self::Exhaustive);
        }
        let bad = || Error::Config(format!("unrecognised dictionary mode `{s}`"));
        if let Some(m) = s.strip_prefix("maxcard=") {
            return Ok(Self::MaxCardinality {
                m: m.parse().map_err(|_| bad())?,
            });
        }
        if let Some(rest) = s.strip_prefix("sampled=") {
            let (c, seed) = rest.split_once(':').ok_or_else(bad)?;
            return Ok(Self::Sampled {
                count: c.parse().map_err(|_| bad())?,
                seed: seed.parse().map_err(|_| bad())?,
            });
        }
        Err(bad())
    }
}

impl std::fmt::Display for DictionaryMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Exhaustive => write!(f, "exhaustive"),
            Self::MaxCardinality { m } => write!(f, "maxcard={m}"),
            Self::Sampled { count, seed } => write!(f, "sampled={count}:{seed}"),
        }
    }
}

/// A family of patterns with closed-form prior weights.
///
/// Exhaustive and max-cardinality dictionaries are enumerated lazily in
/// canonical order (cardinality, then lexicographic); sampled dictionaries
/// hold their patterns explicitly. Priors are never renormalised over a
/// restricted family.
#[derive(Debug)]
pub struct Dictionary {
    family: PatternFamily,
    n: usize,
    mode: DictionaryMode,
    max_card: usize,
    sampled: Option<Vec<Pattern>>,
    projectors: OnceLock<Vec<ConvexProjector>>,
}

impl Clone for Dictionary {
    fn clone(&self) -> Self {
        Self {
            family: self.family,
            n: self.n,
            mode: self.mode,
            max_card: self.max_card,
            sampled: self.sampled.clone(),
            projectors: OnceLock::new(),
        }
    }
}

pub fn build_dictionary(family: PatternFamily, n: usize, mode: DictionaryMode) -> Result<Dictionary> {
    Dictionary::build(family, n, mode)
}

impl Dictionary {
    pub fn build(family: PatternFamily, n: usize, mode: DictionaryMode) -> Result<Self> {
        if n < family.min_len() {
            return domain(format!("{family} dictionary needs n >= {}", family.min_len()));
        }
        let slots = family.slots(n);
        let (max_card, sampled) = match mode {
            DictionaryMode::Exhaustive => {
                if n > EXHAUSTIVE_MAX_N {
                    return Err(Error::Capacity(format!(
                        "exhaustive dictionary limited to n <= {EXHAUSTIVE_MAX_N} (got n = {n}); use maxcard=M"
                    )));
                }
                (slots, None)
            }
            DictionaryMode::MaxCardinality { m } => (m.min(slots), None),
            DictionaryMode::Sampled { count, seed } => {
                if count == 0 {
                    return domain("sampled dictionary needs count >= 1");
                }
                let pats = sample_patterns(family, n, count, seed);
                let max = pats.iter().map(Pattern::len).max().unwrap_or(0);
                (max, Some(pats))
            }
        };
        Ok(Self {
            family,
            n,
            mode,
            max_card,
            sampled,
            projectors: OnceLock::new(),
        })
    }

    pub fn family(&self) -> PatternFamily {
        self.family
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn mode(&self) -> DictionaryMode {
        self.mode
    }

    /// Largest cardinality of a pattern in the dictionary.
    pub fn max_cardinality(&self) -> usize {
        self.max_card
    }

    /// Whether the dictionary holds every pattern of cardinality up to
    /// `max_cardinality`.
    pub fn is_cardinality_complete(&self) -> bool {
        self.sampled.is_none()
    }

    pub fn len(&self) -> u128 {
        match &self.sampled {
            Some(p) => p.len() as u128,
            None => {
                let slots = self.family.slots(self.n) as u128;
                (0..=self.max_card as u128).map(|c| binomial_u128(slots, c)).sum()
            }
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, p: &Pattern) -> bool {
        if p.domain() != self.family.domain(self.n) {
            return false;
        }
        match &self.sampled {
            Some(pats) => pats.binary_search_by(|q| canonical_cmp(q, p)).is_ok(),
            None => p.len() <= self.max_card,
        }
    }

    /// Closed-form log prior of a pattern (not renormalised).
    pub fn log_prior(&self, p: &Pattern) -> f64 {
        log_prior(self.family, p.len(), self.n)
    }

    /// Lazily enumerates the patterns in canonical order.
    pub fn iter(&self) -> Box<dyn Iterator<Item = Pattern> + '_> {
        match &self.sampled {
            Some(p) => Box::new(p.iter().cloned()),
            None => {
                let (lo, hi) = self.family.domain(self.n);
                Box::new(Combinations::new(lo, hi, self.max_card))
            }
        }
    }

    /// All patterns, or a capacity error past [`MATERIALIZE_MAX`].
    pub fn patterns(&self) -> Result<Vec<Pattern>> {
        let len = self.len();
        if len > MATERIALIZE_MAX {
            return Err(Error::Capacity(format!(
                "dictionary holds {len} patterns, more than the {MATERIALIZE_MAX} that can be listed"
            )));
        }
        Ok(self.iter().collect())
    }

    /// Log priors aligned with [`Dictionary::patterns`].
    pub fn log_priors(&self) -> Result<Vec<f64>> {
        Ok(self.patterns()?.iter().map(|p| self.log_prior(p)).collect())
    }

    /// Factorised projectors for every pattern of a convex dictionary, built
    /// once and shared by later solves.
    pub(crate) fn convex_projectors(&self) -> Result<&[ConvexProjector]> {
        if let Some(p) = self.projectors.get() {
            return Ok(p);
        }
        let built = self
            .patterns()?
            .iter()
            .map(|p| ConvexProjector::new(self.n, p))
            .collect::<Result<Vec<_>>>()?;
        Ok(self.projectors.get_or_init(|| built))
    }
}

fn canonical_cmp(a: &Pattern, b: &Pattern) -> std::cmp::Ordering {
    a.len().cmp(&b.len()).then_with(|| a.indices().cmp(b.indices()))
}

fn sample_patterns(family: PatternFamily, n: usize, count: usize, seed: u64) -> Vec<Pattern> {
    let (lo, hi) = family.domain(n);
    let slots = family.slots(n);
    let total = if slots >= 127 { u128::MAX } else { 1u128 << slots };
    let target = (count as u128).min(total) as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut set: BTreeSet<Vec<usize>> = BTreeSet::new();
    set.insert(Vec::new());
    while set.len() < target {
        let idx: Vec<usize> = (lo..=hi).filter(|_| rng.random::<bool>()).collect();
        set.insert(idx);
    }
    let mut pats: Vec<Pattern> = set
        .into_iter()
        .map(|idx| Pattern::from_sorted_unchecked(idx, lo, hi))
        .collect();
    pats.sort_by(canonical_cmp);
    pats
}

pub(crate) fn binomial_u128(n: u128, k: u128) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul(n - i) / (i + 1);
    }
    acc
}

/// Subsets of `lo..=hi` of size `0..=max_card`, by size then lexicographic.
struct Combinations {
    lo: usize,
    hi: usize,
    max_card: usize,
    current: Option<Vec<usize>>,
    started: bool,
}

impl Combinations {
    fn new(lo: usize, hi: usize, max_card: usize) -> Self {
        Self {
            lo,
            hi,
            max_card,
            current: Some(Vec::new()),
            started: false,
        }
    }

    fn advance(&mut self) {
        let Some(cur) = self.current.as_mut() else {
            return;
        };
        let c = cur.len();
        // rightmost position that can still move
        let mut i = c;
        while i > 0 {
            let limit = self.hi + 1 - (c - i + 1);
            if cur[i - 1] < limit {
                cur[i - 1] += 1;
                for j in i..c {
                    cur[j] = cur[j - 1] + 1;
                }
                return;
            }
            i -= 1;
        }
        let next = c + 1;
        let slots = if self.hi >= self.lo { self.hi - self.lo + 1 } else { 0 };
        if next > self.max_card || next > slots {
            self.current = None;
        } else {
            *cur = (self.lo..self.lo + next).collect();
        }
    }
}

impl Iterator for Combinations {
    type Item = Pattern;

    fn next(&mut self) -> Option<Pattern> {
        if self.started {
            self.advance();
        }
        self.started = true;
        self.current
            .as_ref()
            .map(|c| Pattern::from_sorted_unchecked(c.clone(), self.lo, self.hi))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn idx(d: &Dictionary) -> Vec<Vec<usize>> {
        d.iter().map(|p| p.indices().to_vec()).collect()
    }

    #[test]
    fn exhaustive_small() {
        let d = Dictionary::build(PatternFamily::Monotone, 3, DictionaryMode::Exhaustive).unwrap();
        assert_eq!(idx(&d), vec![vec![], vec![1], vec![2], vec![1, 2]]);
        assert_eq!(d.len(), 4);
        let d = Dictionary::build(PatternFamily::Convex, 5, DictionaryMode::Exhaustive).unwrap();
        let all = idx(&d);
        assert_eq!(all.len(), 8);
        assert!(all.iter().flatten().all(|&i| (2..=4).contains(&i)));
        assert_eq!(d.len(), 8);
    }

    #[test]
    fn max_cardinality_count() {
        let d = Dictionary::build(PatternFamily::Monotone, 100, DictionaryMode::MaxCardinality { m: 2 }).unwrap();
        assert_eq!(d.len(), 4951);
        assert_eq!(d.iter().count(), 4951);
        let big = Dictionary::build(PatternFamily::Monotone, 256, DictionaryMode::MaxCardinality { m: 8 }).unwrap();
        assert!(big.len() > MATERIALIZE_MAX);
        assert!(matches!(big.patterns(), Err(Error::Capacity(_))));
    }

    #[test]
    fn exhaustive_capacity() {
        assert!(matches!(
            Dictionary::build(PatternFamily::Monotone, 22, DictionaryMode::Exhaustive),
            Err(Error::Capacity(_))
        ));
        assert!(Dictionary::build(PatternFamily::Monotone, 1, DictionaryMode::Exhaustive).is_err());
        assert!(Dictionary::build(PatternFamily::Convex, 2, DictionaryMode::Exhaustive).is_err());
    }

    #[test]
    fn canonical_order_and_distinct() {
        let d = Dictionary::build(PatternFamily::Monotone, 7, DictionaryMode::Exhaustive).unwrap();
        let pats = d.patterns().unwrap();
        assert_eq!(pats.len(), 64);
        for w in pats.windows(2) {
            assert_eq!(canonical_cmp(&w[0], &w[1]), std::cmp::Ordering::Less);
        }
        let lp = d.log_priors().unwrap();
        let total: f64 = lp.iter().map(|v| v.exp()).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sampled_is_deterministic() {
        let mode = DictionaryMode::Sampled { count: 50, seed: 7 };
        let a = Dictionary::build(PatternFamily::Monotone, 30, mode).unwrap();
        let b = Dictionary::build(PatternFamily::Monotone, 30, mode).unwrap();
        assert_eq!(idx(&a), idx(&b));
        assert_eq!(a.len(), 50);
        assert!(a.contains(&Pattern::monotone(30, vec![]).unwrap()));
        let small = Dictionary::build(
            PatternFamily::Monotone,
            3,
            DictionaryMode::Sampled { count: 99, seed: 1 },
        )
        .unwrap();
        assert_eq!(small.len(), 4);
    }

    #[test]
    fn mode_parsing() {
        assert_eq!(
            "exhaustive".parse::<DictionaryMode>().unwrap(),
            DictionaryMode::Exhaustive
        );
        assert_eq!(
            "maxcard=8".parse::<DictionaryMode>().unwrap(),
            DictionaryMode::MaxCardinality { m: 8 }
        );
        assert_eq!(
            "sampled=100:3".parse::<DictionaryMode>().unwrap(),
            DictionaryMode::Sampled { count: 100, seed: 3 }
        );
        assert!("sampled=100".parse::<DictionaryMode>().is_err());
        for m in ["exhaustive", "maxcard=3", "sampled=5:9"] {
            assert_eq!(m.parse::<DictionaryMode>().unwrap().to_string(), m);
        }
    }

    #[test]
    fn membership() {
        let d = Dictionary::build(PatternFamily::Monotone, 10, DictionaryMode::MaxCardinality { m: 2 }).unwrap();
        assert!(d.contains(&Pattern::monotone(10, vec![3, 7]).unwrap()));
        assert!(!d.contains(&Pattern::monotone(10, vec![1, 3, 7]).unwrap()));
        assert!(!d.contains(&Pattern::monotone(11, vec![3]).unwrap()));
    }
}
