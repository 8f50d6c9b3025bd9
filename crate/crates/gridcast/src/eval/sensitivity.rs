//! Granularity sensitivity: re-bin, re-window, re-split, re-train, and
//! re-evaluate the configured models per time interval.

use chrono::{DateTime, Utc};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::metrics::{evaluate_predictions, EvaluationReport};
use crate::datasets::{
    bin_incidents, build_dataset, medic_forecast, DemandDataset, ExternalData, GridSpec,
    IncidentRecord, SplitFractions, SplitLabel,
};
use crate::model::{build_model, train, ModelKind, ModelSpec, TrainOptions, TrainedModel};
use crate::tensor::Tensor;
use crate::{Error, Result};

pub const DEFAULT_GRANULARITIES: [u32; 5] = [2, 4, 8, 12, 24];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SensitivityConfig {
    pub granularities: Vec<u32>,
    pub look_back: usize,
    pub fractions: SplitFractions,
    pub prune_threshold: Option<f64>,
    pub max_epochs: usize,
    pub patience: usize,
    pub medic_weeks: usize,
    pub seed: u64,
}

impl Default for SensitivityConfig {
    fn default() -> Self {
        SensitivityConfig {
            granularities: DEFAULT_GRANULARITIES.to_vec(),
            look_back: 6,
            fractions: SplitFractions::default(),
            prune_threshold: Some(0.8),
            max_epochs: 60,
            patience: 10,
            medic_weeks: 4,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SensitivityRow {
    pub granularity_hours: u32,
    pub report: EvaluationReport,
}

/// Test-split fingerprint: hash over instance count and timestamps.
pub fn test_fingerprint(ds: &DemandDataset) -> String {
    let test = ds.indices(SplitLabel::Test);
    let mut h: u64 = 0xcbf29ce484222325;
    let mut mix = |v: u64| {
        h ^= v;
        h = h.wrapping_mul(0x100000001b3);
    };
    mix(test.len() as u64);
    for &i in &test {
        mix(ds.timestamps[i].timestamp() as u64);
    }
    format!("{h:016x}")
}

/// Demand-space predictions and raw targets of the test split.
pub fn test_predictions(
    model: &TrainedModel,
    ds: &DemandDataset,
) -> Result<(Vec<Tensor>, Vec<Tensor>)> {
    let test = ds.indices(SplitLabel::Test);
    let mut preds = Vec::with_capacity(test.len());
    let mut actuals = Vec::with_capacity(test.len());
    for &i in &test {
        preds.push(model.predict_demand(&ds.instances[i])?);
        actuals.push(ds.targets[i].clone());
    }
    Ok((preds, actuals))
}

/// Medic forecasts for the test split of a windowed dataset. The cube
/// period of test instance `k` is its dataset index plus the look back.
pub fn medic_test_predictions(
    cube: &Tensor,
    ds: &DemandDataset,
    weeks: usize,
) -> Result<(Vec<Tensor>, Vec<Tensor>)> {
    let test = ds.indices(SplitLabel::Test);
    let mut preds = Vec::with_capacity(test.len());
    let mut actuals = Vec::with_capacity(test.len());
    for &i in &test {
        let t = i + ds.schema.look_back;
        preds.push(medic_forecast(cube, t, ds.schema.granularity_hours, weeks)?);
        actuals.push(ds.targets[i].clone());
    }
    Ok((preds, actuals))
}

/// Runs the full pipeline per granularity and reports the tuned-spec CNN
/// next to the Medic baseline. The demand range normalizing NRMSE is
/// recomputed per granularity over all intervals and subregions.
#[allow(clippy::too_many_arguments)]
pub fn sensitivity_run(
    records: &[IncidentRecord],
    grid: &GridSpec,
    range: (DateTime<Utc>, DateTime<Utc>),
    externals: &ExternalData,
    config: &SensitivityConfig,
    spec_for: &dyn Fn(&crate::datasets::FeatureSchema) -> ModelSpec,
) -> Result<Vec<SensitivityRow>> {
    let mut rows = Vec::new();
    for &g in &config.granularities {
        let with_context = |e: Error| -> Error {
            Error::Data(format!("granularity {g} h: {e}"))
        };
        let (cube, timeline, _) =
            bin_incidents(records, grid, g, range).map_err(with_context)?;
        let (ds, _) = build_dataset(
            &cube,
            &timeline,
            grid,
            externals,
            config.look_back,
            config.fractions,
            config.prune_threshold,
        )
        .map_err(with_context)?;
        let y_range = ds.target_range();
        let fp = test_fingerprint(&ds);

        let mut spec = spec_for(&ds.schema);
        spec.kind = ModelKind::Cnn;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let model = build_model(&spec, &ds.schema, &mut rng).map_err(with_context)?;
        let opts = TrainOptions {
            max_epochs: config.max_epochs,
            patience: config.patience,
            fractions: config.fractions,
            seed: config.seed,
        };
        let trained = train(model, &ds, &opts).map_err(with_context)?;
        let (preds, actuals) = test_predictions(&trained, &ds).map_err(with_context)?;
        rows.push(SensitivityRow {
            granularity_hours: g,
            report: evaluate_predictions("cnn", g, &preds, &actuals, y_range, &fp)
                .map_err(with_context)?,
        });

        let (medic_preds, medic_actuals) =
            medic_test_predictions(&cube, &ds, config.medic_weeks).map_err(with_context)?;
        rows.push(SensitivityRow {
            granularity_hours: g,
            report: evaluate_predictions("medic", g, &medic_preds, &medic_actuals, y_range, &fp)
                .map_err(with_context)?,
        });
    }
    Ok(rows)
}
