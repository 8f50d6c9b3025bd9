//! Min-max scaling fitted on the train split only.

use serde::{Deserialize, Serialize};

use super::{DemandDataset, SplitLabel};
use crate::{Error, Result};

/// Per-feature `(min, max)` from the train split, plus the demand range
/// used to scale targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerState {
    pub per_feature: Vec<(f64, f64)>,
    pub target: (f64, f64),
}

impl ScalerState {
    /// `x' = (x - min) / (max - min)`; constant features map to 0.
    pub fn scale_value(bounds: (f64, f64), x: f64) -> f64 {
        let (lo, hi) = bounds;
        if hi - lo <= 0.0 {
            0.0
        } else {
            (x - lo) / (hi - lo)
        }
    }

    pub fn unscale_value(bounds: (f64, f64), x: f64) -> f64 {
        let (lo, hi) = bounds;
        if hi - lo <= 0.0 {
            lo
        } else {
            lo + x * (hi - lo)
        }
    }

    pub fn scale_target(&self, y: f64) -> f64 {
        Self::scale_value(self.target, y)
    }

    pub fn unscale_target(&self, y: f64) -> f64 {
        Self::unscale_value(self.target, y)
    }
}

/// Fits per-feature min/max over the train split.
///
/// Validation and test values routed through the scaler may fall outside
/// `[0,1]`; only train values are guaranteed inside.
pub fn fit_scaler(ds: &DemandDataset) -> Result<ScalerState> {
    let train = ds.indices(SplitLabel::Train);
    if train.is_empty() {
        return Err(Error::Argument(
            "scaler must be fitted on a dataset with a train split".into(),
        ));
    }
    let n_features = ds.schema.features.len();
    let mut per_feature = vec![(f64::INFINITY, f64::NEG_INFINITY); n_features];
    for &i in &train {
        for (f, value) in ds.instances[i].values.iter().enumerate() {
            for v in value.flat() {
                per_feature[f].0 = per_feature[f].0.min(v);
                per_feature[f].1 = per_feature[f].1.max(v);
            }
        }
    }
    // Demand range also covers train targets so predictions can be unscaled.
    let demand = ds.schema.demand_index();
    let mut target = per_feature[demand];
    for &i in &train {
        for &v in ds.targets[i].data() {
            target.0 = target.0.min(v);
            target.1 = target.1.max(v);
        }
    }
    Ok(ScalerState {
        per_feature,
        target,
    })
}

/// Scales every instance in place; targets stay raw.
pub fn apply_scaler(ds: &mut DemandDataset, scaler: &ScalerState) -> Result<()> {
    if scaler.per_feature.len() != ds.schema.features.len() {
        return Err(Error::Argument(format!(
            "scaler has {} features, dataset has {}",
            scaler.per_feature.len(),
            ds.schema.features.len()
        )));
    }
    for inst in &mut ds.instances {
        for (f, value) in inst.values.iter_mut().enumerate() {
            let bounds = scaler.per_feature[f];
            *value = value.map_values(|v| ScalerState::scale_value(bounds, v));
        }
    }
    ds.scaler = Some(scaler.clone());
    Ok(())
}
