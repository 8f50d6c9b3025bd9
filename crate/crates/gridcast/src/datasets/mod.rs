//! From raw incident and external-feature files to typed model instances:
//! grid binning, look-back windowing, time one-hots, scaling, correlation
//! pruning, chronological splits, the Medic baseline, and a synthetic
//! generator with known ground truth.

mod grid;
mod ingest;
mod medic;
mod prune;
mod scale;
mod split;
mod synth;
mod tabular;
mod timefeat;
mod window;

pub use grid::{bin_incidents, BinReport, GridSpec, Timeline};
pub use ingest::{
    read_events_csv, read_holidays_csv, read_incidents_csv, read_weather_csv, write_events_csv,
    write_holidays_csv, write_incidents_csv, write_weather_csv, EventRecord, ExternalData,
    HolidayRecord, IncidentRecord, WeatherTable,
};
pub use medic::medic_forecast;
pub use prune::{correlation_prune, PruneOutcome};
pub use scale::{apply_scaler, fit_scaler, ScalerState};
pub use split::{chronological_split, SplitFractions};
pub use synth::{synth_generate, Hotspot, SynthConfig, SynthOutput, SynthTruth};
pub use tabular::{tabular_feature_names, tabular_row, to_tabular};
pub use timefeat::{one_hot_time, TimeOneHots};
pub use window::{build_dataset, window_instances};

use serde::{Deserialize, Serialize};

use crate::tensor::Tensor;
use crate::{Error, Result};

/// Dimensionality class of a feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    /// The spatio-temporal demand cube `q x p x L`; exactly one per schema.
    Demand3d,
    /// A `q x p` map for the predicted period (events).
    Map2d,
    /// A length-`L` historic series (weather history).
    Series,
    /// A one-hot time encoding.
    OneHot,
    /// A single value for the predicted period.
    Scalar,
}

/// Describes one feature of an instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureDescriptor {
    pub name: String,
    pub kind: FeatureKind,
    /// Payload length: `L` for series, width for one-hots, 1 for scalars,
    /// `q * p` for maps, `q * p * L` for the demand cube.
    pub len: usize,
    /// Historic series flagged for transposed-convolution upsampling.
    pub upsample: bool,
    /// Source columns in the raw files.
    pub source: Vec<String>,
}

/// Ordered feature layout shared by datasets and models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub q: usize,
    pub p: usize,
    pub look_back: usize,
    pub granularity_hours: u32,
    pub features: Vec<FeatureDescriptor>,
}

impl FeatureSchema {
    pub fn validate(&self) -> Result<()> {
        let demand_count = self
            .features
            .iter()
            .filter(|f| f.kind == FeatureKind::Demand3d)
            .count();
        if demand_count != 1 {
            return Err(Error::Data(format!(
                "schema must contain exactly one demand cube feature, found {demand_count}"
            )));
        }
        for f in &self.features {
            let expect = match f.kind {
                FeatureKind::Demand3d => self.q * self.p * self.look_back,
                FeatureKind::Map2d => self.q * self.p,
                FeatureKind::Series => self.look_back,
                FeatureKind::OneHot => f.len, // widths fixed at construction
                FeatureKind::Scalar => 1,
            };
            if f.len != expect {
                return Err(Error::Data(format!(
                    "feature {} has len {}, expected {expect}",
                    f.name, f.len
                )));
            }
            if f.upsample && f.kind != FeatureKind::Series {
                return Err(Error::Data(format!(
                    "feature {}: only historic series can be upsampled",
                    f.name
                )));
            }
        }
        Ok(())
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    /// Index of the demand cube feature.
    pub fn demand_index(&self) -> usize {
        self.features
            .iter()
            .position(|f| f.kind == FeatureKind::Demand3d)
            .expect("validated schema has a demand feature")
    }
}

/// Payload of one feature within one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum FeatureValue {
    Cube { tensor: Tensor },
    Map { tensor: Tensor },
    Vector { values: Vec<f64> },
    Scalar { value: f64 },
}

impl FeatureValue {
    /// Flat view of the payload.
    pub fn flat(&self) -> Vec<f64> {
        match self {
            FeatureValue::Cube { tensor } | FeatureValue::Map { tensor } => {
                tensor.data().to_vec()
            }
            FeatureValue::Vector { values } => values.clone(),
            FeatureValue::Scalar { value } => vec![*value],
        }
    }

    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> FeatureValue {
        match self {
            FeatureValue::Cube { tensor } => FeatureValue::Cube {
                tensor: tensor.map(&f),
            },
            FeatureValue::Map { tensor } => FeatureValue::Map {
                tensor: tensor.map(&f),
            },
            FeatureValue::Vector { values } => FeatureValue::Vector {
                values: values.iter().map(|&v| f(v)).collect(),
            },
            FeatureValue::Scalar { value } => FeatureValue::Scalar { value: f(*value) },
        }
    }
}

/// One model input: feature payloads in schema order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub values: Vec<FeatureValue>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitLabel {
    Train,
    Val,
    Test,
}

/// Windowed instances with `q x p` target heatmaps and chronological
/// train/validation/test labels.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DemandDataset {
    pub schema: FeatureSchema,
    pub instances: Vec<Instance>,
    /// Raw (unscaled) target heatmaps.
    pub targets: Vec<Tensor>,
    /// Start of each instance's target period, UTC.
    pub timestamps: Vec<chrono::DateTime<chrono::Utc>>,
    /// Empty until [`chronological_split`] assigns labels.
    pub split: Vec<SplitLabel>,
    pub scaler: Option<ScalerState>,
}

impl DemandDataset {
    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn indices(&self, label: SplitLabel) -> Vec<usize> {
        self.split
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == label)
            .map(|(i, _)| i)
            .collect()
    }

    /// Minimum and maximum observed demand over all targets.
    pub fn target_range(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for t in &self.targets {
            for &v in t.data() {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        (lo, hi)
    }

    /// Drops the features at `remove` (schema indices) from the schema and
    /// from every instance.
    pub fn drop_features(&mut self, remove: &[usize]) {
        let keep: Vec<usize> = (0..self.schema.features.len())
            .filter(|i| !remove.contains(i))
            .collect();
        self.schema.features = keep
            .iter()
            .map(|&i| self.schema.features[i].clone())
            .collect();
        for inst in &mut self.instances {
            inst.values = keep.iter().map(|&i| inst.values[i].clone()).collect();
        }
    }
}
