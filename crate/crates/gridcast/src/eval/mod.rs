//! Metrics, model comparison, granularity sensitivity, and Shapley
//! attribution.

mod metrics;
mod report;
mod sensitivity;
mod shapley;

pub use metrics::{
    compare_models, evaluate_predictions, mse, mse_many, nrmse, split_metrics, ComparisonRow,
    ComparisonTable, EvaluationReport, SplitMetrics,
};
pub use report::{attribution_csv, comparison_csv, sensitivity_csv, svg_line_chart};
pub use sensitivity::{
    medic_test_predictions, sensitivity_run, test_fingerprint, test_predictions,
    SensitivityConfig, SensitivityRow, DEFAULT_GRANULARITIES,
};
pub use shapley::{
    attribution_report, permutation_shapley, shapley_for_model, Attribution, AttributionConfig,
    AttributionRow, AttributionTable, AttributionTarget,
};
