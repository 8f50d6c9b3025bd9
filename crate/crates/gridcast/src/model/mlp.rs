//! Per-subregion MLP benchmark.
//!
//! One fully connected network serves all subregions: the input is a
//! subregion's own demand history, the shared external features, and a
//! one-hot subregion index; the output is that subregion's scalar demand.
//! Predictions for the full grid apply the network per subregion and
//! reassemble the heatmap.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ModelSpec;
use crate::datasets::{FeatureKind, FeatureSchema, FeatureValue, Instance};
use crate::layers::{Dense, GradientBundle};
use crate::tensor::{Activation, Tensor};
use crate::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MlpModel {
    pub mask: Vec<bool>,
    /// Schema indices of selected non-demand features, flattened into the
    /// input (2-D maps contribute their subregion cell).
    pub shared_features: Vec<usize>,
    pub dense: Vec<Dense>,
    q: usize,
    p: usize,
    look_back: usize,
}

pub struct MlpCache {
    dense_inputs: Vec<Tensor>,
    dropout_masks: Vec<Option<Vec<f64>>>,
    pub output: f64,
}

pub fn build_mlp(spec: &ModelSpec, schema: &FeatureSchema, rng: &mut impl Rng) -> Result<MlpModel> {
    schema.validate()?;
    let mask = spec.resolve_mask(schema)?;
    let (q, p) = (schema.q, schema.p);
    let mut shared_features = Vec::new();
    let mut shared_len = 0usize;
    for (fi, f) in schema.features.iter().enumerate() {
        if !mask[fi] || f.kind == FeatureKind::Demand3d {
            continue;
        }
        shared_features.push(fi);
        shared_len += match f.kind {
            FeatureKind::Map2d => 1, // the subregion's own cell
            _ => f.len,
        };
    }
    let in_size = schema.look_back + shared_len + q * p;
    let mut dense = Vec::new();
    let mut cur = in_size;
    for &w in &spec.dense_widths {
        if w == 0 {
            continue;
        }
        dense.push(Dense::new(cur, w, spec.act_dense).init_glorot(rng));
        cur = w;
    }
    dense.push(Dense::new(cur, 1, Activation::Identity).init_glorot(rng));
    Ok(MlpModel {
        mask,
        shared_features,
        dense,
        q,
        p,
        look_back: schema.look_back,
    })
}

impl MlpModel {
    pub fn grid(&self) -> (usize, usize) {
        (self.q, self.p)
    }

    /// Input vector for one subregion.
    pub fn subregion_input(
        &self,
        schema: &FeatureSchema,
        instance: &Instance,
        row: usize,
        col: usize,
    ) -> Result<Vec<f64>> {
        let demand = schema.demand_index();
        let cube = match &instance.values[demand] {
            FeatureValue::Cube { tensor } => tensor,
            other => {
                return Err(Error::Shape(format!(
                    "demand feature must be a cube, got {other:?}"
                )))
            }
        };
        let mut x = Vec::with_capacity(self.dense[0].in_size);
        for u in 0..self.look_back {
            x.push(cube.at(&[row, col, u]));
        }
        for &fi in &self.shared_features {
            match (&schema.features[fi].kind, &instance.values[fi]) {
                (FeatureKind::Map2d, FeatureValue::Map { tensor }) => {
                    x.push(tensor.at(&[row, col]))
                }
                (_, value) => x.extend(value.flat()),
            }
        }
        let mut one_hot = vec![0.0; self.q * self.p];
        one_hot[row * self.p + col] = 1.0;
        x.extend(one_hot);
        Ok(x)
    }

    pub fn forward_cell_cached(
        &self,
        input: &[f64],
        mut dropout: Option<(f64, &mut dyn rand::RngCore)>,
    ) -> Result<MlpCache> {
        let mut v = Tensor::vector(input);
        let mut dense_inputs = Vec::with_capacity(self.dense.len());
        let mut dropout_masks = Vec::new();
        for (i, layer) in self.dense.iter().enumerate() {
            dense_inputs.push(v.clone());
            let mut h = layer.forward(&v)?;
            if i + 1 < self.dense.len() {
                let mask = match &mut dropout {
                    Some((rate, rng)) if *rate > 0.0 => {
                        let keep = 1.0 - *rate;
                        let m: Vec<f64> = (0..h.len())
                            .map(|_| {
                                if rng.random::<f64>() < *rate {
                                    0.0
                                } else {
                                    1.0 / keep
                                }
                            })
                            .collect();
                        for (hv, &mv) in h.data_mut().iter_mut().zip(&m) {
                            *hv *= mv;
                        }
                        Some(m)
                    }
                    _ => None,
                };
                dropout_masks.push(mask);
            }
            v = h;
        }
        Ok(MlpCache {
            dense_inputs,
            dropout_masks,
            output: v.data()[0],
        })
    }

    pub fn backward_cell(&self, cache: &MlpCache, grad_output: f64) -> Result<Vec<GradientBundle>> {
        let mut g = Tensor::vector(&[grad_output]);
        let mut bundles: Vec<GradientBundle> = Vec::with_capacity(self.dense.len());
        for i in (0..self.dense.len()).rev() {
            let bundle = self.dense[i].backward(&cache.dense_inputs[i], &g)?;
            g = bundle.grad_input.clone();
            if i > 0 {
                if let Some(mask) = &cache.dropout_masks[i - 1] {
                    for (gv, &mv) in g.data_mut().iter_mut().zip(mask) {
                        *gv *= mv;
                    }
                }
            }
            bundles.push(bundle);
        }
        bundles.reverse();
        Ok(bundles)
    }

    /// Per-subregion forward passes reassembled into a heatmap.
    pub fn forward(&self, schema: &FeatureSchema, instance: &Instance) -> Result<Tensor> {
        let mut out = Tensor::zeros(&[self.q, self.p]);
        for row in 0..self.q {
            for col in 0..self.p {
                let x = self.subregion_input(schema, instance, row, col)?;
                let cache = self.forward_cell_cached(&x, None)?;
                out.set(&[row, col], cache.output);
            }
        }
        Ok(out)
    }

    pub fn params_mut(&mut self) -> Vec<(&mut Tensor, &mut Tensor)> {
        self.dense
            .iter_mut()
            .map(|l| (&mut l.weights, &mut l.bias))
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.dense.iter().map(|l| l.param_count()).sum()
    }

    pub fn stage_names(&self) -> Vec<String> {
        (0..self.dense.len()).map(|i| format!("dense_{i}")).collect()
    }
}
