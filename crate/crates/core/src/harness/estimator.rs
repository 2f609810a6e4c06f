use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{convex_ls, isotonic_ls, tv_estimator, LambdaRule, TVTuning, CONVEX_LS_TOL};
use crate::projection::{project_piecewise_constant, project_piecewise_linear};
use crate::qagg::{solve_qagg, Dictionary, DictionaryMode, QAggConfig};
use crate::seq::{Pattern, PatternFamily, Sequence, ShapeClass};

use super::approx::class_approximation;

/// `Σ|μ_{i+1} - μ_i|`, floored at `σ/√n` so constant and near-constant
/// signals still get a finite penalty.
fn oracle_v(mu: &Sequence, sigma: f64) -> f64 {
    let tv: f64 = mu.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
    tv.max(sigma / (mu.len() as f64).sqrt())
}

/// A fitted procedure `y ↦ μ̂(y)`. Implementations are pure.
pub trait Estimator: Send + Sync {
    fn estimate(&self, y: &Sequence) -> Result<Sequence>;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TvRuleName {
    Kstar,
    Universal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QaggParams {
    #[serde(with = "mode_str", default = "default_mode")]
    pub dict: DictionaryMode,
    #[serde(default = "default_constant")]
    pub penalty_constant: f64,
    #[serde(default = "default_qagg_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

impl Default for QaggParams {
    fn default() -> Self {
        Self {
            dict: default_mode(),
            penalty_constant: default_constant(),
            tol: default_qagg_tol(),
            max_iter: default_max_iter(),
        }
    }
}

fn default_mode() -> DictionaryMode {
    DictionaryMode::Exhaustive
}
fn default_constant() -> f64 {
    QAggConfig::default().penalty_constant
}
fn default_qagg_tol() -> f64 {
    QAggConfig::default().tol
}
fn default_max_iter() -> usize {
    QAggConfig::default().max_iter
}
fn default_delta() -> f64 {
    0.1
}
fn default_convex_tol() -> f64 {
    CONVEX_LS_TOL
}

mod mode_str {
    use serde::{Deserialize, Deserializer, Serializer};

    use crate::qagg::DictionaryMode;

    pub fn serialize<S: Serializer>(m: &DictionaryMode, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(m)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DictionaryMode, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

/// Estimators selectable from configs and the command line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum EstimatorSpec {
    Identity,
    GrandMean,
    /// Projection onto `V_J` (monotone family) or `W_J` (convex family).
    Projection {
        family: PatternFamily,
        pattern: Vec<usize>,
    },
    Pava,
    ConvexLs {
        #[serde(default = "default_convex_tol")]
        tol: f64,
    },
    /// Total variation denoising. Either `lambda` or `rule` must be given.
    /// The k* rule uses `v` when set and `V(μ)` otherwise.
    Tv {
        #[serde(default)]
        lambda: Option<f64>,
        #[serde(default)]
        rule: Option<TvRuleName>,
        #[serde(default = "default_delta")]
        delta: f64,
        #[serde(default)]
        v: Option<f64>,
    },
    Qagg(QaggParams),
    QaggConvex(QaggParams),
    /// Returns the best class approximation of the true mean, ignoring `y`.
    ClassOracle {
        class: ShapeClass,
    },
}

impl EstimatorSpec {
    pub fn label(&self) -> String {
        match self {
            EstimatorSpec::Identity => "identity".into(),
            EstimatorSpec::GrandMean => "grand_mean".into(),
            EstimatorSpec::Projection { family, pattern } => {
                let idx: Vec<String> = pattern.iter().map(|i| i.to_string()).collect();
                let f = match family {
                    PatternFamily::Monotone => "V",
                    PatternFamily::Convex => "W",
                };
                format!("projection {f}{{{}}}", idx.join(" "))
            }
            EstimatorSpec::Pava => "pava".into(),
            EstimatorSpec::ConvexLs { .. } => "convex_ls".into(),
            EstimatorSpec::Tv { lambda, rule, .. } => match (lambda, rule) {
                (Some(l), _) => format!("tv(lambda={l})"),
                (None, Some(TvRuleName::Kstar)) => "tv(kstar)".into(),
                (None, Some(TvRuleName::Universal)) => "tv(universal)".into(),
                (None, None) => "tv".into(),
            },
            EstimatorSpec::Qagg(p) => format!("qagg({}; C={})", p.dict, p.penalty_constant),
            EstimatorSpec::QaggConvex(p) => format!("qagg_convex({}; C={})", p.dict, p.penalty_constant),
            EstimatorSpec::ClassOracle { class } => format!("class_oracle({class})"),
        }
    }

    /// Static checks that do not depend on `n`.
    pub fn validate(&self) -> Result<()> {
        match self {
            EstimatorSpec::Tv { lambda, rule, delta, v } => {
                if lambda.is_none() && rule.is_none() {
                    return Err(Error::Config("tv needs `lambda` or `rule`".into()));
                }
                if lambda.is_some() && rule.is_some() {
                    return Err(Error::Config("tv takes `lambda` or `rule`, not both".into()));
                }
                if !(*delta > 0.0 && *delta < 1.0) {
                    return Err(Error::Config(format!("delta must lie in (0, 1), got {delta}")));
                }
                if let Some(v) = v {
                    if !(*v > 0.0) {
                        return Err(Error::Config(format!("V must be positive, got {v}")));
                    }
                }
                Ok(())
            }
            EstimatorSpec::Qagg(p) | EstimatorSpec::QaggConvex(p) => {
                if !(p.penalty_constant > 0.0 && p.tol > 0.0 && p.max_iter > 0) {
                    return Err(Error::Config("qagg needs positive constant, tol and max_iter".into()));
                }
                Ok(())
            }
            EstimatorSpec::ClassOracle { class } => class.validate(),
            EstimatorSpec::ConvexLs { tol } if !(*tol > 0.0) => Err(Error::Config(format!(
                "convex_ls tolerance must be positive, got {tol}"
            ))),
            _ => Ok(()),
        }
    }

    /// Resolves `n`-dependent state (dictionaries, penalty levels) once per
    /// grid cell. `mu` is only read by the class oracle and the default V.
    pub fn prepare(&self, mu: &Sequence, sigma: f64) -> Result<Box<dyn Estimator>> {
        self.validate()?;
        let n = mu.len();
        Ok(match self {
            EstimatorSpec::Identity => Box::new(Identity),
            EstimatorSpec::GrandMean => Box::new(GrandMean),
            EstimatorSpec::Projection { family, pattern } => {
                let p = Pattern::for_family(*family, n, pattern.clone())?;
                Box::new(Projection {
                    family: *family,
                    pattern: p,
                })
            }
            EstimatorSpec::Pava => Box::new(Pava),
            EstimatorSpec::ConvexLs { tol } => Box::new(ConvexLs { tol: *tol }),
            EstimatorSpec::Tv { lambda, rule, delta, v } => {
                let rule = match (lambda, rule) {
                    (Some(l), _) => LambdaRule::Explicit { lambda: *l },
                    (None, Some(TvRuleName::Universal)) => LambdaRule::Universal { sigma, delta: *delta },
                    (None, Some(TvRuleName::Kstar)) => LambdaRule::AdaptiveKStar {
                        v: v.unwrap_or_else(|| oracle_v(mu, sigma)),
                        sigma,
                        delta: *delta,
                    },
                    (None, None) => unreachable!("validated"),
                };
                let tuning = TVTuning { rule };
                tuning.lambda(n)?;
                Box::new(Tv { tuning })
            }
            EstimatorSpec::Qagg(p) => Box::new(Qagg::new(PatternFamily::Monotone, n, sigma, p)?),
            EstimatorSpec::QaggConvex(p) => Box::new(Qagg::new(PatternFamily::Convex, n, sigma, p)?),
            EstimatorSpec::ClassOracle { class } => Box::new(Fixed(class_approximation(mu, class)?.fit)),
        })
    }
}

struct Identity;

impl Estimator for Identity {
    fn estimate(&self, y: &Sequence) -> Result<Sequence> {
        Ok(y.clone())
    }
}

struct GrandMean;

impl Estimator for GrandMean {
    fn estimate(&self, y: &Sequence) -> Result<Sequence> {
        Sequence::constant(y.len(), y.mean())
    }
}

struct Projection {
    family: PatternFamily,
    pattern: Pattern,
}

impl Estimator for Projection {
    fn estimate(&self, y: &Sequence) -> Result<Sequence> {
        match self.family {
            PatternFamily::Monotone => project_piecewise_constant(y, &self.pattern),
            PatternFamily::Convex => project_piecewise_linear(y, &self.pattern),
        }
    }
}

struct Pava;

impl Estimator for Pava {
    fn estimate(&self, y: &Sequence) -> Result<Sequence> {
        Ok(Sequence::from_vec_unchecked(isotonic_ls(y)))
    }
}

struct ConvexLs {
    tol: f64,
}

impl Estimator for ConvexLs {
    fn estimate(&self, y: &Sequence) -> Result<Sequence> {
        Ok(Sequence::from_vec_unchecked(convex_ls(y, self.tol)?))
    }
}

struct Tv {
    tuning: TVTuning,
}

impl Estimator for Tv {
    fn estimate(&self, y: &Sequence) -> Result<Sequence> {
        Ok(Sequence::from_vec_unchecked(tv_estimator(y, &self.tuning)?))
    }
}

struct Qagg {
    dict: Dictionary,
    sigma: f64,
    cfg: QAggConfig,
}

impl Qagg {
    fn new(family: PatternFamily, n: usize, sigma: f64, p: &QaggParams) -> Result<Self> {
        Ok(Self {
            dict: Dictionary::build(family, n, p.dict)?,
            sigma,
            cfg: QAggConfig {
                tol: p.tol,
                max_iter: p.max_iter,
                penalty_constant: p.penalty_constant,
                ..QAggConfig::default()
            },
        })
    }
}

impl Estimator for Qagg {
    fn estimate(&self, y: &Sequence) -> Result<Sequence> {
        Ok(solve_qagg(y, self.sigma, &self.dict, &self.cfg)?.estimate)
    }
}

struct Fixed(Sequence);

impl Estimator for Fixed {
    fn estimate(&self, _y: &Sequence) -> Result<Sequence> {
        Ok(self.0.clone())
    }
}
