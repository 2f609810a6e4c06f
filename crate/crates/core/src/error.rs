use std::path::PathBuf;

/// Errors produced by the estimators, oracles and experiment harness.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A request exceeds what can be enumerated or stored.
    #[error("capacity exceeded: {0}")]
    Capacity(String),

    /// An iterative method stopped before reaching its tolerance.
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    Convergence { iterations: usize, residual: f64 },

    /// The Q-aggregation solver ran out of iterations. The best iterate is kept.
    #[error("Q-aggregation stopped with duality gap {gap:e} after {iterations} iterations")]
    QAggConvergence {
        gap: f64,
        iterations: usize,
        best: Box<crate::qagg::QAggSolution>,
    },

    #[error("packing search failed: {0}")]
    Search(String),

    /// Too many Monte Carlo replicates failed for the estimate to be kept.
    #[error("{failed} of {total} replicates failed; first failure: {first}")]
    ReplicateFailures { failed: usize, total: usize, first: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error in {path}: {msg}")]
    Parse { path: PathBuf, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
