//! Model assembly and training: the heatmap CNN, the per-subregion MLP
//! benchmark, early-stopping minibatch training, and persistence.

mod cnn;
mod mlp;
mod persist;
mod train;

pub use cnn::{build_cnn, CnnCache, CnnGrads, CnnModel};
pub use mlp::{build_mlp, MlpCache, MlpModel};
pub use persist::{load_model, save_model, schema_hash};
pub use train::{train, EpochStats, TrainOptions};

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::datasets::{FeatureSchema, Instance, ScalerState};
use crate::hyperopt::{DimensionKind, ParamValue, SearchSpace, Theta};
use crate::tensor::{Activation, Tensor};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Cnn,
    Mlp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    Momentum,
    Adam,
}

/// Declarative model description assembled from a hyperparameter
/// assignment. Stage fields that a kind does not use are ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub grid: (usize, usize),
    pub look_back: usize,
    /// Selection flag per feature name; the demand cube must stay on.
    /// Features missing from the map count as selected.
    pub feature_mask: BTreeMap<String, bool>,
    pub conv_layers: usize,
    pub conv_filters: usize,
    pub conv_kernel: (usize, usize, usize),
    pub upsample_filters: usize,
    pub fusion_filters: usize,
    pub local_filters: usize,
    pub local_kernel: (usize, usize),
    /// Hidden dense widths; the output width (`q*p` for the CNN, 1 for the
    /// MLP) is implied. Zero entries are skipped.
    pub dense_widths: Vec<usize>,
    pub act_conv: Activation,
    pub act_local: Activation,
    pub act_dense: Activation,
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub l2: f64,
    pub dropout: f64,
}

impl ModelSpec {
    /// Baseline spec with every feature selected.
    pub fn default_for(kind: ModelKind, schema: &FeatureSchema) -> Self {
        ModelSpec {
            kind,
            grid: (schema.q, schema.p),
            look_back: schema.look_back,
            feature_mask: BTreeMap::new(),
            conv_layers: 2,
            conv_filters: 4,
            conv_kernel: (3, 3, 2),
            upsample_filters: 2,
            fusion_filters: 2,
            local_filters: 1,
            local_kernel: (1, 1),
            dense_widths: vec![32],
            act_conv: Activation::Relu,
            act_local: Activation::Relu,
            act_dense: Activation::Relu,
            optimizer: OptimizerKind::Adam,
            learning_rate: 1e-2,
            batch_size: 16,
            l2: 1e-6,
            dropout: 0.0,
        }
    }

    /// Resolves the name-keyed mask into per-schema-index flags.
    pub fn resolve_mask(&self, schema: &FeatureSchema) -> Result<Vec<bool>> {
        let mask: Vec<bool> = schema
            .features
            .iter()
            .map(|f| *self.feature_mask.get(&f.name).unwrap_or(&true))
            .collect();
        let demand = schema.demand_index();
        if !mask[demand] {
            return Err(Error::Config(
                "feature mask must keep the demand cube selected".into(),
            ));
        }
        if (self.grid.0, self.grid.1) != (schema.q, schema.p) || self.look_back != schema.look_back
        {
            return Err(Error::Config(format!(
                "spec grid {:?} / L {} does not match schema {}x{} / L {}",
                self.grid, self.look_back, schema.q, schema.p, schema.look_back
            )));
        }
        Ok(mask)
    }

    /// Reads a hyperparameter assignment into a concrete spec. Dimension
    /// names follow the default search spaces; absent names keep the
    /// baseline value, binary `feat:` flags populate the feature mask.
    pub fn from_assignment(
        kind: ModelKind,
        schema: &FeatureSchema,
        space: &SearchSpace,
        theta: &Theta,
    ) -> Result<ModelSpec> {
        let mut spec = ModelSpec::default_for(kind, schema);
        let int = |name: &str, default: usize| -> usize {
            match space.index_of(name).map(|i| &theta[i]) {
                Some(ParamValue::Int(v)) => *v as usize,
                _ => default,
            }
        };
        let real = |name: &str, default: f64| -> f64 {
            match space.index_of(name).map(|i| &theta[i]) {
                Some(ParamValue::Real(v)) => *v,
                _ => default,
            }
        };
        let cat = |name: &str| -> Option<&str> {
            let i = space.index_of(name)?;
            match (&space.dims()[i].kind, &theta[i]) {
                (DimensionKind::Categorical { choices }, ParamValue::Cat(c)) => {
                    Some(choices[*c].as_str())
                }
                _ => None,
            }
        };
        let act = |name: &str, default: Activation| -> Activation {
            match cat(name) {
                Some("relu") => Activation::Relu,
                Some("sigmoid") => Activation::Sigmoid,
                Some("tanh") => Activation::Tanh,
                Some("elu") => Activation::Elu,
                Some("identity") => Activation::Identity,
                _ => default,
            }
        };

        spec.conv_layers = int("conv_layers", spec.conv_layers);
        spec.conv_filters = int("conv_filters", spec.conv_filters);
        let ks = int("conv_kernel_space", spec.conv_kernel.0);
        let kt = int("conv_kernel_time", spec.conv_kernel.2);
        spec.conv_kernel = (ks, ks, kt);
        spec.upsample_filters = int("upsample_filters", spec.upsample_filters);
        spec.fusion_filters = int("fusion_filters", spec.fusion_filters);
        spec.local_filters = int("local_filters", spec.local_filters);
        let lk = int("local_kernel", spec.local_kernel.0);
        spec.local_kernel = (lk, lk);
        match kind {
            ModelKind::Cnn => {
                spec.dense_widths = vec![int("dense_width", 32)];
            }
            ModelKind::Mlp => {
                let layers = int("hidden_layers", 1);
                let width = int("hidden_width", 32);
                spec.dense_widths = vec![width; layers];
                spec.act_dense = act("act_hidden", spec.act_dense);
            }
        }
        spec.act_conv = act("act_conv", spec.act_conv);
        spec.act_local = act("act_local", spec.act_local);
        if kind == ModelKind::Cnn {
            spec.act_dense = act("act_dense", spec.act_dense);
        }
        spec.optimizer = match cat("optimizer") {
            Some("sgd") => OptimizerKind::Sgd,
            Some("momentum") => OptimizerKind::Momentum,
            Some("adam") => OptimizerKind::Adam,
            _ => spec.optimizer,
        };
        spec.learning_rate = real("learning_rate", spec.learning_rate);
        spec.batch_size = int("batch_size", spec.batch_size).max(1);
        spec.l2 = real("l2", spec.l2);
        spec.dropout = real("dropout", spec.dropout);

        for (dim, value) in space.dims().iter().zip(theta) {
            if let (DimensionKind::BinaryFeature { feature }, ParamValue::Bin(on)) =
                (&dim.kind, value)
            {
                spec.feature_mask.insert(feature.clone(), *on);
            }
        }
        Ok(spec)
    }
}

/// A built network with its spec, schema, training history, and the scaler
/// its targets were trained against.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainedModel {
    pub spec: ModelSpec,
    pub schema: FeatureSchema,
    pub net: Network,
    pub history: Vec<EpochStats>,
    pub scaler: Option<ScalerState>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Network {
    Cnn(CnnModel),
    Mlp(MlpModel),
}

/// Builds an untrained model of the spec's kind.
pub fn build_model(
    spec: &ModelSpec,
    schema: &FeatureSchema,
    rng: &mut impl Rng,
) -> Result<TrainedModel> {
    let net = match spec.kind {
        ModelKind::Cnn => Network::Cnn(build_cnn(spec, schema, rng)?),
        ModelKind::Mlp => Network::Mlp(build_mlp(spec, schema, rng)?),
    };
    Ok(TrainedModel {
        spec: spec.clone(),
        schema: schema.clone(),
        net,
        history: vec![],
        scaler: None,
    })
}

impl TrainedModel {
    /// Deterministic forward pass in model space (scaled units when the
    /// model was trained on scaled data). Dropout is disabled.
    pub fn predict(&self, instance: &Instance) -> Result<Tensor> {
        match &self.net {
            Network::Cnn(m) => m.forward(&self.schema, instance),
            Network::Mlp(m) => m.forward(&self.schema, instance),
        }
    }

    /// Prediction in demand units: unscaled through the stored scaler and
    /// clamped at zero.
    pub fn predict_demand(&self, instance: &Instance) -> Result<Tensor> {
        let raw = self.predict(instance)?;
        Ok(match &self.scaler {
            Some(s) => raw.map(|v| s.unscale_target(v).max(0.0)),
            None => raw.map(|v| v.max(0.0)),
        })
    }

    pub fn predict_batch(&self, instances: &[Instance]) -> Result<Vec<Tensor>> {
        instances.iter().map(|i| self.predict(i)).collect()
    }

    /// Total learned-parameter count over all stages.
    pub fn count_params(&self) -> usize {
        match &self.net {
            Network::Cnn(m) => m.param_count(),
            Network::Mlp(m) => m.param_count(),
        }
    }
}
