//! Shape-constrained estimation in the Gaussian sequence model `y = μ + ξ`.
//!
//! The crate provides least-squares estimators over monotone and convex
//! sequences, total-variation denoising, Q-aggregation of projection
//! estimators over sparsity-pattern dictionaries, oracle inequality
//! right-hand sides, minimax lower-bound constructions and a deterministic
//! Monte Carlo harness.
//!
//! All norms are scaled: `‖u‖² = (1/n) Σ u_i²`. Indices in public interfaces
//! are 1-based.

pub mod error;
pub mod estimators;
pub mod harness;
pub mod lower;
pub mod oracle;
pub mod projection;
pub mod qagg;
pub mod selftest;
pub mod seq;

pub use error::{Error, Result};
pub use seq::{Pattern, PatternFamily, Sequence, ShapeClass};
