//! Best approximation of a mean vector inside a shape class.

use serde::Serialize;

use crate::error::Result;
use crate::estimators::{convex_ls, isotonic_ls, CONVEX_LS_TOL};
use crate::oracle::SegmentationTable;
use crate::projection::ConvexProjector;
use crate::seq::{
    count_knots_q, is_convex, is_convex_tol, is_member, is_monotone, scaled_dist_sq, total_variation_v, Pattern,
    Sequence, ShapeClass,
};

/// Largest `n` for which knot sets are enumerated for `ConvexQPieces`.
const CONVEX_Q_ENUM_MAX_N: usize = 18;

#[derive(Clone, Debug, Serialize)]
pub struct ClassApprox {
    pub fit: Sequence,
    /// `‖fit - μ‖²`.
    pub dist_sq: f64,
    /// False when `fit` is only a feasible point, so `dist_sq` bounds the
    /// minimum from above.
    pub exact: bool,
}

/// The member of `class` closest to `mu`, or a feasible stand-in.
pub fn class_approximation(mu: &Sequence, class: &ShapeClass) -> Result<ClassApprox> {
    class.validate()?;
    let (fit, exact) = match *class {
        ShapeClass::Monotone => (isotonic_ls(mu), true),
        ShapeClass::MonotoneKPieces { k } => {
            // Optimal segmentations of a monotone sequence are monotone.
            let exact = is_monotone(mu);
            let base = if exact { mu.to_vec() } else { isotonic_ls(mu) };
            let k = k.min(base.len());
            let table = SegmentationTable::build(&base, k)?;
            (table.fit(&base, k), exact)
        }
        ShapeClass::MonotoneBoundedV { v } => bounded_variation_fit(mu, v),
        ShapeClass::Convex => (convex_ls(mu, CONVEX_LS_TOL)?, true),
        ShapeClass::ConvexQPieces { q } => convex_q_fit(mu, q)?,
    };
    let dist_sq = scaled_dist_sq(&fit, mu);
    let fit = Sequence::from_vec_unchecked(fit);
    if is_member(mu, class) {
        return Ok(ClassApprox {
            fit: mu.clone(),
            dist_sq: 0.0,
            exact: true,
        });
    }
    Ok(ClassApprox { fit, dist_sq, exact })
}

fn clip(u: &[f64], lo: f64, hi: f64) -> Vec<f64> {
    u.iter().map(|&x| x.clamp(lo, hi)).collect()
}

/// For a fixed band `[a, a+V]`, clipping the isotonic fit gives the projection
/// onto monotone sequences inside the band. The squared distance is convex in
/// `a`, so a golden-section search over `a` finishes the job.
fn bounded_variation_fit(mu: &[f64], v: f64) -> (Vec<f64>, bool) {
    let iso = isotonic_ls(mu);
    if total_variation_v(&iso) <= v {
        return (iso, true);
    }
    let (lo0, hi0) = (iso[0], iso[iso.len() - 1] - v);
    let f = |a: f64| scaled_dist_sq(&clip(&iso, a, a + v), mu);
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (lo0, hi0);
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    let scale = (hi0 - lo0).abs().max(1.0);
    while hi - lo > 1e-13 * scale {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = f(x2);
        }
    }
    let a = 0.5 * (lo + hi);
    (clip(&iso, a, a + v), false)
}

/// Best convex `Q_J μ` over knot sets with `|J| ≤ q - 1`. Enumerated for small
/// `n`, forward selection otherwise. The affine fit is always a candidate.
fn convex_q_fit(mu: &[f64], q: usize) -> Result<(Vec<f64>, bool)> {
    let n = mu.len();
    if n < 3 {
        return Ok((mu.to_vec(), true));
    }
    if is_convex(mu) && count_knots_q(mu)? <= q {
        return Ok((mu.to_vec(), true));
    }
    let tol = 1e-9 * (1.0 + mu.iter().fold(0.0f64, |m, v| m.max(v.abs())));
    let interior: Vec<usize> = (2..n).collect();
    let max_card = (q - 1).min(interior.len());
    let fit_for = |idx: &[usize]| -> Result<Option<(Vec<f64>, f64)>> {
        let p = Pattern::convex(n, idx.to_vec())?;
        let u = ConvexProjector::new(n, &p)?.project(mu);
        if is_convex_tol(&u, tol) {
            let d = scaled_dist_sq(&u, mu);
            Ok(Some((u, d)))
        } else {
            Ok(None)
        }
    };
    let mut best = fit_for(&[])?.expect("affine fits are convex");
    if n <= CONVEX_Q_ENUM_MAX_N {
        let mut combo: Vec<usize> = Vec::new();
        enumerate(&interior, max_card, 0, &mut combo, &mut |c| {
            if !c.is_empty() {
                if let Some((u, d)) = fit_for(c)? {
                    if d < best.1 {
                        best = (u, d);
                    }
                }
            }
            Ok(())
        })?;
    } else {
        let mut chosen: Vec<usize> = Vec::new();
        for _ in 0..max_card {
            let mut step: Option<(usize, Vec<f64>, f64)> = None;
            for &t in &interior {
                if chosen.contains(&t) {
                    continue;
                }
                let mut c = chosen.clone();
                c.push(t);
                c.sort_unstable();
                if let Some((u, d)) = fit_for(&c)? {
                    if step.as_ref().is_none_or(|s| d < s.2) {
                        step = Some((t, u, d));
                    }
                }
            }
            match step {
                Some((t, u, d)) if d < best.1 => {
                    chosen.push(t);
                    best = (u, d);
                }
                _ => break,
            }
        }
    }
    Ok((best.0, false))
}

fn enumerate(
    items: &[usize],
    max_card: usize,
    start: usize,
    combo: &mut Vec<usize>,
    visit: &mut dyn FnMut(&[usize]) -> Result<()>,
) -> Result<()> {
    visit(combo)?;
    if combo.len() == max_card {
        return Ok(());
    }
    for i in start..items.len() {
        combo.push(items[i]);
        enumerate(items, max_card, i + 1, combo, visit)?;
        combo.pop();
    }
    Ok(())
}
