//! Q-aggregation of projection estimators over pattern dictionaries.

mod dictionary;
mod solver;

pub use dictionary::{build_dictionary, Dictionary, DictionaryMode, EXHAUSTIVE_MAX_N, MATERIALIZE_MAX};
pub use solver::{
    qagg_estimate_convex, qagg_estimate_monotone, qagg_objective, solve_qagg, QAggConfig, QAggSolution, SimplexWeights,
};
