//! Mixed-space Bayesian optimization with intrinsic feature selection.
//!
//! A [`SearchSpace`] mixes real, integer, categorical, and binary
//! feature-flag dimensions. Three runners minimize a black-box objective:
//!
//! - [`bo_run`] — random-search initialization followed by basic BO with a
//!   Gaussian-process or tree-ensemble surrogate and expected improvement;
//! - [`bo_dropout_run`] — per-iteration dimension dropout with the
//!   Dropout-Mix fill rule for left-out coordinates;
//! - [`hierarchical_bo_run`] — sequential BO over a disjoint [`Partition`]
//!   of the dimensions, each set optimized with the rest fixed at the
//!   incumbent.

mod defaults;
mod gp;
mod run;
mod space;

pub use defaults::{
    default_space, default_space_mlp, DEFAULT_BO_ITERATIONS, DEFAULT_RANDOM_INIT,
    DEFAULT_SET_RANDOM, DEFAULT_SET_TOTAL,
};
pub use gp::{gp_fit, gp_fit_with_options, GpFitOptions, GpParams, GpSurrogate, NOISE_FLOOR};
pub use run::{
    bo_dropout_run, bo_run, expected_improvement, hierarchical_bo_run, normal_cdf, normal_pdf,
    propose_next, trace_csv, validate_partition, BoOptions, ForestSurrogate, Partition,
    PartitionSet, SurrogateKind, SurrogateModel, TuneResult,
};
pub use space::{
    decode, encode, sample_random, theta_to_json, Dimension, DimensionKind, ParamValue,
    Provenance, SearchSpace, Theta, Trial,
};
