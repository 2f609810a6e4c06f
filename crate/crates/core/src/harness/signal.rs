use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::seq::{read_sequence, Sequence};

/// Grid on which slopes are quantised so that second differences of the
/// generated piecewise-linear signals are exact in floating point.
const QUANTUM: f64 = (1u64 << 30) as f64;

/// Deterministic test signals. None of them draws random numbers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum SignalSpec {
    Constant {
        c: f64,
    },
    /// `k` balanced blocks with levels `j V/(k-1)`, `j = 0..k-1`.
    Staircase {
        k: usize,
        v: f64,
    },
    /// Equispaced ramp from 0 to (at most) `V`.
    Linear {
        v: f64,
    },
    /// `V √((i-1)/(n-1))`.
    SqrtRamp {
        v: f64,
    },
    /// Convex, `q` linear pieces, rising by (at most) `V`.
    ConvexKinks {
        q: usize,
        v: f64,
    },
    CustomCsv {
        path: PathBuf,
    },
}

impl SignalSpec {
    pub fn label(&self) -> String {
        match self {
            SignalSpec::Constant { c } => format!("constant(c={c})"),
            SignalSpec::Staircase { k, v } => format!("staircase(k={k},V={v})"),
            SignalSpec::Linear { v } => format!("linear(V={v})"),
            SignalSpec::SqrtRamp { v } => format!("sqrt_ramp(V={v})"),
            SignalSpec::ConvexKinks { q, v } => format!("convex_kinks(q={q},V={v})"),
            SignalSpec::CustomCsv { path } => format!("custom_csv({})", path.display()),
        }
    }
}

fn quantise_down(x: f64) -> f64 {
    (x * QUANTUM).floor() / QUANTUM
}

pub fn generate_signal(spec: &SignalSpec, n: usize) -> Result<Sequence> {
    if n == 0 {
        return domain("signal length must be positive");
    }
    let nonneg = |v: f64| {
        if v >= 0.0 && v.is_finite() {
            Ok(())
        } else {
            Err(Error::Config(format!("signal variation must be non-negative, got {v}")))
        }
    };
    let values = match spec {
        SignalSpec::Constant { c } => vec![*c; n],
        SignalSpec::Staircase { k, v } => {
            nonneg(*v)?;
            if *k == 0 || *k > n {
                return Err(Error::Config(format!(
                    "staircase needs 1 <= k <= n, got k = {k}, n = {n}"
                )));
            }
            let mut out = Vec::with_capacity(n);
            for j in 0..*k {
                let size = n / k + usize::from(j < n % k);
                let level = if *k == 1 { 0.0 } else { j as f64 * v / (*k - 1) as f64 };
                out.extend(std::iter::repeat_n(level, size));
            }
            out
        }
        SignalSpec::Linear { v } => {
            nonneg(*v)?;
            if n == 1 {
                vec![0.0]
            } else {
                let slope = quantise_down(v / (n - 1) as f64);
                (0..n).map(|i| i as f64 * slope).collect()
            }
        }
        SignalSpec::SqrtRamp { v } => {
            nonneg(*v)?;
            if n == 1 {
                vec![0.0]
            } else {
                (0..n).map(|i| v * (i as f64 / (n - 1) as f64).sqrt()).collect()
            }
        }
        SignalSpec::ConvexKinks { q, v } => {
            nonneg(*v)?;
            if *q == 0 || (*q > 1 && *q > n.saturating_sub(1)) {
                return Err(Error::Config(format!(
                    "convex_kinks needs 1 <= q <= n - 1, got q = {q}, n = {n}"
                )));
            }
            let knots = kink_positions(n, *q);
            let reach: usize = knots.iter().map(|&t| n - t).sum();
            let c = if reach == 0 {
                0.0
            } else {
                quantise_down(v / reach as f64)
            };
            (1..=n)
                .map(|i| c * knots.iter().map(|&t| i.saturating_sub(t)).sum::<usize>() as f64)
                .collect()
        }
        SignalSpec::CustomCsv { path } => {
            let s = read_sequence(path)?;
            if s.len() != n {
                return Err(Error::Config(format!(
                    "custom signal {} has length {}, expected {n}",
                    path.display(),
                    s.len()
                )));
            }
            return Ok(s);
        }
    };
    Sequence::new(values)
}

/// `q - 1` distinct interior knots near `j n/q`.
fn kink_positions(n: usize, q: usize) -> Vec<usize> {
    let mut knots: Vec<usize> = Vec::with_capacity(q.saturating_sub(1));
    for j in 1..q {
        let mut t = ((j * n) as f64 / q as f64).round() as usize;
        t = t.clamp(2, n - 1);
        if let Some(&last) = knots.last() {
            t = t.max(last + 1);
        }
        knots.push(t);
    }
    knots
}
