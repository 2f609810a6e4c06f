use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracle::BoundSpec;
use crate::seq::ShapeClass;

use super::estimator::EstimatorSpec;
use super::signal::SignalSpec;

pub const DEFAULT_REPLICATES: usize = 200;
/// Below this many replicates standard errors are not published.
pub const MIN_REPLICATES_FOR_STDERR: usize = 30;

/// One experiment grid. Loaded from TOML:
///
/// ```toml
/// name = "staircase"
/// n_grid = [8, 12, 16]
/// sigma = 1.0
/// replicates = 200
/// master_seed = 7
/// class = { kind = "monotone_k_pieces", k = 2 }
///
/// [signal]
/// family = "staircase"
/// k = 2
/// v = 1.0
///
/// [[estimators]]
/// method = "qagg"
/// dict = "exhaustive"
///
/// [[oracle_spec]]
/// family = "monotone"
/// leading_constant = 1.0
/// penalty_constant = 10.0
/// penalty_exponent = 1.0
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: String,
    pub n_grid: Vec<usize>,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default)]
    pub master_seed: u64,
    /// Class against which regrets are reported.
    #[serde(default)]
    pub class: Option<ShapeClass>,
    /// Write the SVG plot.
    #[serde(default = "default_true")]
    pub plot: bool,
    /// Fill the `runtime_ms` column. Timings make reports non-reproducible.
    #[serde(default)]
    pub record_runtime: bool,
    #[serde(default = "default_output_dir", skip_serializing)]
    pub output_dir: PathBuf,
    pub signal: SignalSpec,
    pub estimators: Vec<EstimatorSpec>,
    #[serde(default)]
    pub oracle_spec: Vec<BoundSpec>,
    #[serde(default)]
    pub adversarial: Option<AdversarialConfig>,
}

/// Finite stand-in for a maximum over all mean vectors: the signal itself,
/// the signal plus perturbations orthogonal to it, and packing hypotheses.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdversarialConfig {
    /// Scaled norm of each perturbation, in units of σ.
    #[serde(default = "default_sigma")]
    pub perturbation_scale: f64,
    #[serde(default = "default_four")]
    pub perturbations: usize,
    /// Number of packing hypotheses to include (0 disables them).
    #[serde(default = "default_four")]
    pub packing_hypotheses: usize,
    #[serde(default)]
    pub seed: u64,
}

impl Default for AdversarialConfig {
    fn default() -> Self {
        Self {
            perturbation_scale: 1.0,
            perturbations: 4,
            packing_hypotheses: 4,
            seed: 0,
        }
    }
}

fn default_sigma() -> f64 {
    1.0
}
fn default_replicates() -> usize {
    DEFAULT_REPLICATES
}
fn default_true() -> bool {
    true
}
fn default_four() -> usize {
    4
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("experiment-out")
}

impl ExperimentConfig {
    /// A config with defaults for everything but the essentials.
    pub fn new(signal: SignalSpec, n_grid: Vec<usize>, estimators: Vec<EstimatorSpec>) -> Self {
        Self {
            name: String::new(),
            n_grid,
            sigma: default_sigma(),
            replicates: DEFAULT_REPLICATES,
            master_seed: 0,
            class: None,
            plot: true,
            record_runtime: false,
            output_dir: default_output_dir(),
            signal,
            estimators,
            oracle_spec: Vec::new(),
            adversarial: None,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: Self = toml::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_grid.is_empty() {
            return bad("n_grid is empty".into());
        }
        if self.n_grid.windows(2).any(|w| w[1] <= w[0]) || self.n_grid[0] == 0 {
            return bad("n_grid must be positive and strictly increasing".into());
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return bad(format!("sigma must be positive, got {}", self.sigma));
        }
        if self.replicates == 0 {
            return bad("replicates must be at least 1".into());
        }
        if self.estimators.is_empty() {
            return bad("no estimators configured".into());
        }
        for e in &self.estimators {
            e.validate()?;
        }
        for s in &self.oracle_spec {
            s.validate()?;
        }
        if let Some(c) = &self.class {
            c.validate()?;
        }
        if let Some(a) = &self.adversarial {
            if self.class.is_none() {
                return bad("the adversarial grid needs a `class`".into());
            }
            if !(a.perturbation_scale > 0.0 && a.perturbation_scale.is_finite()) {
                return bad("perturbation_scale must be positive".into());
            }
        }
        Ok(())
    }

    pub fn publishes_stderr(&self) -> bool {
        self.replicates >= MIN_REPLICATES_FOR_STDERR
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
n_grid = [8]
replicates = 30

[signal]
family = "constant"
c = 0.0

[[estimators]]
method = "identity"
"#;

    #[test]
    fn minimal_config_defaults() {
        let cfg = ExperimentConfig::from_toml_str(MINIMAL).unwrap();
        assert_eq!(cfg.sigma, 1.0);
        assert_eq!(cfg.master_seed, 0);
        assert!(cfg.plot && !cfg.record_runtime);
        assert!(cfg.publishes_stderr());
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(ExperimentConfig::from_toml_str(&MINIMAL.replace("[8]", "[8, 8]")).is_err());
        assert!(ExperimentConfig::from_toml_str(&MINIMAL.replace("identity", "magic")).is_err());
        assert!(ExperimentConfig::from_toml_str(&format!("bogus = 1\n{MINIMAL}")).is_err());
        assert!(ExperimentConfig::from_toml_str(&MINIMAL.replace("constant", "wavelet")).is_err());
        let adv = format!("{MINIMAL}\n[adversarial]\n");
        assert!(ExperimentConfig::from_toml_str(&adv).is_err());
    }

    #[test]
    fn full_config() {
        let text = r#"
name = "demo"
n_grid = [8, 12, 16]
sigma = 0.5
master_seed = 9
class = { kind = "monotone_k_pieces", k = 2 }

[signal]
family = "staircase"
k = 2
v = 1.0

[[estimators]]
method = "qagg"
dict = "maxcard=3"
penalty_constant = 10.0

[[estimators]]
method = "tv"
rule = "universal"

[[oracle_spec]]
family = "monotone"
leading_constant = 1.0
penalty_constant = 6.0
penalty_exponent = 1.0

[adversarial]
perturbations = 2
"#;
        let cfg = ExperimentConfig::from_toml_str(text).unwrap();
        assert_eq!(cfg.estimators.len(), 2);
        assert_eq!(cfg.adversarial.as_ref().unwrap().perturbations, 2);
        assert_eq!(cfg.adversarial.as_ref().unwrap().packing_hypotheses, 4);
    }
}
