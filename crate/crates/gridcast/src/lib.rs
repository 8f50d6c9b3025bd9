//! Spatio-temporal demand forecasting on a subregion grid.
//!
//! The crate predicts per-interval demand heatmaps over a `q x p` grid from
//! historic demand and external features of mixed dimensionality. It bundles:
//!
//! - [`tensor`] — dense row-major `f64` tensors and activation functions;
//! - [`layers`] — 3-D convolution, transposed 3-D convolution, locally
//!   connected, dense, and temporal-fusion layers with analytic gradients;
//! - [`model`] — the heatmap CNN, a per-subregion MLP benchmark, and
//!   early-stopping minibatch training;
//! - [`trees`] — CART regression trees, random forests, and extremely
//!   randomized trees (benchmarks, surrogates, feature reporting);
//! - [`hyperopt`] — mixed-space Bayesian optimization: random search,
//!   Gaussian-process and tree-ensemble surrogates, expected improvement,
//!   dimension dropout, hierarchical decomposition, and binary feature
//!   flags for intrinsic feature selection;
//! - [`datasets`] — incident binning, look-back windowing, scaling,
//!   correlation pruning, chronological splits, the Medic baseline, and a
//!   synthetic generator;
//! - [`eval`] — MSE/NRMSE metrics, zero/non-zero splits, granularity
//!   sensitivity runs, and permutation Shapley attribution;
//! - [`cli`] — the batch pipeline behind the `gridcast` binary.
//!
//! Start with the runnable programs in `examples/`; each demonstrates one
//! capability end to end:
//!
//! - `layer_math` — the four layer types on hand-checkable inputs
//! - `gradient_check` — analytic gradients vs finite differences
//! - `tune_basic_bo` — basic BO vs random search on a quadratic
//! - `tune_dimension_dropout` — 20-dimensional search with dropout
//! - `tune_hierarchical` — partitioned sequential optimization
//! - `feature_selection` — binary feature flags and branch pruning
//! - `synthetic_pipeline` — generate, train, evaluate vs the Medic baseline
//! - `medic_baseline` — the industry baseline on planted references
//! - `trees_benchmark` — tree grid search and selected features
//! - `shapley_attribution` — exact axioms and Monte-Carlo attribution
//! - `sensitivity_sweep` — metrics across time granularities

pub mod cli;
pub mod datasets;
mod error;
pub mod eval;
pub mod hyperopt;
pub mod layers;
pub mod model;
pub mod tensor;
pub mod trees;

pub use error::{Error, Result};
