//! MSE, NRMSE, the zero/non-zero demand split, and model comparison.

use serde::{Deserialize, Serialize};

use crate::tensor::Tensor;
use crate::{Error, Result};

/// Mean of squared cellwise differences.
pub fn mse(pred: &Tensor, actual: &Tensor) -> Result<f64> {
    if pred.shape() != actual.shape() {
        return Err(Error::Shape(format!(
            "mse shape mismatch {:?} vs {:?}",
            pred.shape(),
            actual.shape()
        )));
    }
    let n = pred.len() as f64;
    Ok(pred
        .data()
        .iter()
        .zip(actual.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / n)
}

/// MSE pooled over all cells of all instances.
pub fn mse_many(preds: &[Tensor], actuals: &[Tensor]) -> Result<f64> {
    if preds.len() != actuals.len() || preds.is_empty() {
        return Err(Error::Argument(format!(
            "mse over {} predictions vs {} actuals",
            preds.len(),
            actuals.len()
        )));
    }
    let mut sum = 0.0;
    let mut n = 0usize;
    for (p, a) in preds.iter().zip(actuals) {
        if p.shape() != a.shape() {
            return Err(Error::Shape("mse instance shape mismatch".into()));
        }
        for (x, y) in p.data().iter().zip(a.data()) {
            sum += (x - y) * (x - y);
            n += 1;
        }
    }
    Ok(sum / n as f64)
}

/// `sqrt(MSE) / (y_max - y_min)`.
pub fn nrmse(mse_value: f64, y_max: f64, y_min: f64) -> Result<f64> {
    if mse_value < 0.0 {
        return Err(Error::Argument(format!("mse must be >= 0, got {mse_value}")));
    }
    if !(y_max > y_min) {
        return Err(Error::Argument(format!(
            "degenerate demand range: y_max {y_max} <= y_min {y_min}"
        )));
    }
    Ok(mse_value.sqrt() / (y_max - y_min))
}

/// Per-partition MSE at the cell-period level: actual demand equal to zero
/// versus greater than zero. An empty partition reports no MSE rather
/// than zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitMetrics {
    pub mse_zero: Option<f64>,
    pub mse_nonzero: Option<f64>,
    pub zero_count: usize,
    pub nonzero_count: usize,
}

pub fn split_metrics(preds: &[Tensor], actuals: &[Tensor]) -> Result<SplitMetrics> {
    if preds.len() != actuals.len() {
        return Err(Error::Argument("unaligned prediction/actual sequences".into()));
    }
    let mut zero_sum = 0.0;
    let mut zero_n = 0usize;
    let mut nonzero_sum = 0.0;
    let mut nonzero_n = 0usize;
    for (p, a) in preds.iter().zip(actuals) {
        if p.shape() != a.shape() {
            return Err(Error::Shape("split metrics shape mismatch".into()));
        }
        for (x, y) in p.data().iter().zip(a.data()) {
            let se = (x - y) * (x - y);
            if *y == 0.0 {
                zero_sum += se;
                zero_n += 1;
            } else {
                nonzero_sum += se;
                nonzero_n += 1;
            }
        }
    }
    Ok(SplitMetrics {
        mse_zero: (zero_n > 0).then(|| zero_sum / zero_n as f64),
        mse_nonzero: (nonzero_n > 0).then(|| nonzero_sum / nonzero_n as f64),
        zero_count: zero_n,
        nonzero_count: nonzero_n,
    })
}

/// Per-model evaluation summary on one test split.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub model_id: String,
    pub granularity_hours: u32,
    pub mse: f64,
    pub nrmse: f64,
    pub split: SplitMetrics,
    pub n_instances: usize,
    pub y_min: f64,
    pub y_max: f64,
    /// Identifies the test split; comparisons require equal fingerprints.
    pub test_fingerprint: String,
}

/// Builds a report from demand-space predictions of one test split.
pub fn evaluate_predictions(
    model_id: &str,
    granularity_hours: u32,
    preds: &[Tensor],
    actuals: &[Tensor],
    y_range: (f64, f64),
    test_fingerprint: &str,
) -> Result<EvaluationReport> {
    let overall = mse_many(preds, actuals)?;
    let split = split_metrics(preds, actuals)?;
    let (y_min, y_max) = y_range;
    Ok(EvaluationReport {
        model_id: model_id.into(),
        granularity_hours,
        mse: overall,
        nrmse: nrmse(overall, y_max, y_min)?,
        split,
        n_instances: preds.len(),
        y_min,
        y_max,
        test_fingerprint: test_fingerprint.into(),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub model_id: String,
    pub mse: f64,
    /// `(MSE_this - MSE_best) / MSE_this` as a percentage; 0 for the best.
    pub margin_vs_best_pct: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
}

/// Ranks reports by MSE. The margin states how much lower the best
/// model's MSE is relative to each row's.
pub fn compare_models(reports: &[EvaluationReport]) -> Result<ComparisonTable> {
    if reports.len() < 2 {
        return Err(Error::Comparison("need at least two reports to compare".into()));
    }
    let fp = &reports[0].test_fingerprint;
    if reports.iter().any(|r| &r.test_fingerprint != fp) {
        return Err(Error::Comparison(
            "reports evaluate different test splits".into(),
        ));
    }
    let mut sorted: Vec<&EvaluationReport> = reports.iter().collect();
    sorted.sort_by(|a, b| a.mse.partial_cmp(&b.mse).unwrap());
    let best = sorted[0].mse;
    Ok(ComparisonTable {
        rows: sorted
            .into_iter()
            .map(|r| ComparisonRow {
                model_id: r.model_id.clone(),
                mse: r.mse,
                margin_vs_best_pct: if r.mse > 0.0 {
                    (r.mse - best) / r.mse * 100.0
                } else {
                    0.0
                },
            })
            .collect(),
    })
}
