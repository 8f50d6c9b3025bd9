//! The heatmap CNN: a 3-D convolution stack over historic demand, parallel
//! transposed-convolution branches upsampling historic 1-D series, temporal
//! fusion, concatenation with 2-D maps, a locally connected layer, and a
//! dense head joined by the remaining 1-D and scalar inputs.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ModelSpec;
use crate::datasets::{FeatureKind, FeatureSchema, FeatureValue, Instance};
use crate::layers::{
    Conv3d, Dense, GradientBundle, LocallyConnected2d, Padding, TemporalFusion, TransposedConv3d,
};
use crate::tensor::{Activation, Tensor};
use crate::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CnnModel {
    /// Selection flag per schema feature.
    pub mask: Vec<bool>,
    pub conv_stack: Vec<Conv3d>,
    /// `(schema feature index, upsampling layer)` per selected historic series.
    pub upsample: Vec<(usize, TransposedConv3d)>,
    pub fusion: TemporalFusion,
    /// Schema indices of selected 2-D map features.
    pub map_features: Vec<usize>,
    pub local: LocallyConnected2d,
    /// Schema indices of selected one-hot, scalar, and non-upsampled series
    /// features appended before the dense head.
    pub tail_features: Vec<usize>,
    pub dense: Vec<Dense>,
    q: usize,
    p: usize,
    look_back: usize,
}

/// Intermediate activations kept for the backward pass.
pub struct CnnCache {
    conv_inputs: Vec<Tensor>,
    up_inputs: Vec<Tensor>,
    fused_input: Tensor,
    local_input: Tensor,
    dense_inputs: Vec<Tensor>,
    /// Inverted-dropout scale per hidden layer (training only).
    dropout_masks: Vec<Option<Vec<f64>>>,
    pub output: Tensor,
}

/// Gradients for every parameterized stage, in [`CnnModel::params_mut`] order.
pub struct CnnGrads {
    pub conv: Vec<GradientBundle>,
    pub upsample: Vec<GradientBundle>,
    pub fusion: GradientBundle,
    pub local: GradientBundle,
    pub dense: Vec<GradientBundle>,
}

pub fn build_cnn(spec: &ModelSpec, schema: &FeatureSchema, rng: &mut impl Rng) -> Result<CnnModel> {
    schema.validate()?;
    let mask = spec.resolve_mask(schema)?;
    let (q, p) = (schema.q, schema.p);
    let look_back = schema.look_back;

    let mut conv_stack = Vec::with_capacity(spec.conv_layers);
    for l in 0..spec.conv_layers {
        let in_maps = if l == 0 { 1 } else { spec.conv_filters };
        conv_stack.push(
            Conv3d::new(
                in_maps,
                spec.conv_filters,
                spec.conv_kernel,
                (1, 1, 1),
                Padding::Same,
                spec.act_conv,
            )
            .init_glorot(rng),
        );
    }

    let mut upsample = Vec::new();
    let mut map_features = Vec::new();
    let mut tail_features = Vec::new();
    for (fi, f) in schema.features.iter().enumerate() {
        if !mask[fi] {
            continue;
        }
        match f.kind {
            FeatureKind::Demand3d => {}
            FeatureKind::Series if f.upsample => {
                upsample.push((
                    fi,
                    TransposedConv3d::new(1, spec.upsample_filters, (q, p, 1), (1, 1, 1), spec.act_conv)
                        .init_glorot(rng),
                ));
            }
            FeatureKind::Map2d => map_features.push(fi),
            FeatureKind::Series | FeatureKind::OneHot | FeatureKind::Scalar => {
                tail_features.push(fi)
            }
        }
    }

    let fusion_in = spec.conv_filters + upsample.len() * spec.upsample_filters;
    let fusion =
        TemporalFusion::new(fusion_in, spec.fusion_filters, look_back, spec.act_conv).init_glorot(rng);
    let local_in = spec.fusion_filters + map_features.len();
    let local = LocallyConnected2d::new(
        local_in,
        spec.local_filters,
        spec.local_kernel,
        (q, p),
        spec.act_local,
    )
    .init_glorot(rng);

    let tail_len: usize = tail_features
        .iter()
        .map(|&fi| schema.features[fi].len)
        .sum();
    let mut dense = Vec::new();
    let mut in_size = spec.local_filters * q * p + tail_len;
    for &w in &spec.dense_widths {
        if w == 0 {
            continue; // zero-width hidden layers degenerate to a direct map
        }
        dense.push(Dense::new(in_size, w, spec.act_dense).init_glorot(rng));
        in_size = w;
    }
    dense.push(Dense::new(in_size, q * p, Activation::Identity).init_glorot(rng));

    Ok(CnnModel {
        mask,
        conv_stack,
        upsample,
        fusion,
        map_features,
        local,
        tail_features,
        dense,
        q,
        p,
        look_back,
    })
}

impl CnnModel {
    pub fn grid(&self) -> (usize, usize) {
        (self.q, self.p)
    }

    pub fn forward(&self, schema: &FeatureSchema, instance: &Instance) -> Result<Tensor> {
        Ok(self.forward_cached(schema, instance, None)?.output)
    }

    /// Forward pass with cached intermediates. `dropout` carries the rate of
    /// zeroed hidden units and the training rng; inference passes `None`.
    pub fn forward_cached(
        &self,
        schema: &FeatureSchema,
        instance: &Instance,
        mut dropout: Option<(f64, &mut dyn rand::RngCore)>,
    ) -> Result<CnnCache> {
        if instance.values.len() != schema.features.len() {
            return Err(Error::Shape(format!(
                "instance has {} features, schema {}",
                instance.values.len(),
                schema.features.len()
            )));
        }
        let demand = schema.demand_index();
        let cube = match &instance.values[demand] {
            FeatureValue::Cube { tensor } => tensor,
            other => {
                return Err(Error::Shape(format!(
                    "demand feature must be a cube, got {other:?}"
                )))
            }
        };
        let mut shape = vec![1];
        shape.extend_from_slice(cube.shape());
        let x3d = cube.reshape(&shape)?;

        let mut conv_inputs = Vec::with_capacity(self.conv_stack.len());
        let mut cur = x3d;
        for layer in &self.conv_stack {
            conv_inputs.push(cur.clone());
            cur = layer.forward(&cur)?;
        }
        let conv_out = cur;

        let mut up_inputs = Vec::new();
        let mut branch_outs = vec![conv_out];
        for (fi, layer) in &self.upsample {
            let series = match &instance.values[*fi] {
                FeatureValue::Vector { values } => values,
                other => {
                    return Err(Error::Shape(format!(
                        "series feature must be a vector, got {other:?}"
                    )))
                }
            };
            let input = Tensor::new(vec![1, 1, 1, series.len()], series.clone())?;
            branch_outs.push(layer.forward(&input)?);
            up_inputs.push(input);
        }
        let fused_input = Tensor::concat(&branch_outs.iter().collect::<Vec<_>>(), 0)?;
        let fused_out = self.fusion.forward(&fused_input)?;

        let mut local_parts = vec![fused_out];
        for &fi in &self.map_features {
            let map = match &instance.values[fi] {
                FeatureValue::Map { tensor } => tensor,
                other => {
                    return Err(Error::Shape(format!(
                        "map feature must be 2-D, got {other:?}"
                    )))
                }
            };
            local_parts.push(map.reshape(&[1, self.q, self.p])?);
        }
        let local_input = Tensor::concat(&local_parts.iter().collect::<Vec<_>>(), 0)?;
        let local_out = self.local.forward(&local_input)?;

        let mut tail = local_out.data().to_vec();
        for &fi in &self.tail_features {
            tail.extend(instance.values[fi].flat());
        }
        let mut v = Tensor::vector(&tail);

        let mut dense_inputs = Vec::with_capacity(self.dense.len());
        let mut dropout_masks = Vec::with_capacity(self.dense.len().saturating_sub(1));
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
        let output = v.reshape(&[self.q, self.p])?;
        Ok(CnnCache {
            conv_inputs,
            up_inputs,
            fused_input,
            local_input,
            dense_inputs,
            dropout_masks,
            output,
        })
    }

    /// Chain-rule gradients for every stage given the loss gradient on the
    /// output heatmap.
    pub fn backward(&self, cache: &CnnCache, grad_output: &Tensor) -> Result<CnnGrads> {
        let mut g = grad_output.reshape(&[self.q * self.p])?;
        let mut dense_bundles: Vec<GradientBundle> = Vec::with_capacity(self.dense.len());
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
            dense_bundles.push(bundle);
        }
        dense_bundles.reverse();

        let local_width = self.local.filters * self.q * self.p;
        let grad_local_out = Tensor::new(
            vec![self.local.filters, self.q, self.p],
            g.data()[..local_width].to_vec(),
        )?;
        let local_bundle = self.local.backward(&cache.local_input, &grad_local_out)?;

        let fusion_filters = self.fusion.conv.filters;
        let grad_fused_out = local_bundle.grad_input.narrow(0, 0, fusion_filters)?;
        let fusion_bundle = self.fusion.backward(&cache.fused_input, &grad_fused_out)?;

        let conv_filters = self.conv_stack.last().map(|c| c.filters).unwrap_or(1);
        let mut g_conv = fusion_bundle.grad_input.narrow(0, 0, conv_filters)?;
        let mut conv_bundles: Vec<GradientBundle> = Vec::with_capacity(self.conv_stack.len());
        for l in (0..self.conv_stack.len()).rev() {
            let bundle = self.conv_stack[l].backward(&cache.conv_inputs[l], &g_conv)?;
            g_conv = bundle.grad_input.clone();
            conv_bundles.push(bundle);
        }
        conv_bundles.reverse();

        let mut upsample_bundles = Vec::with_capacity(self.upsample.len());
        let mut at = conv_filters;
        for (b, (_, layer)) in self.upsample.iter().enumerate() {
            let width = layer.filters;
            let grad_branch = fusion_bundle.grad_input.narrow(0, at, width)?;
            at += width;
            upsample_bundles.push(layer.backward(&cache.up_inputs[b], &grad_branch)?);
        }

        Ok(CnnGrads {
            conv: conv_bundles,
            upsample: upsample_bundles,
            fusion: fusion_bundle,
            local: local_bundle,
            dense: dense_bundles,
        })
    }

    /// Mutable `(weights, bias)` pairs in a fixed stage order.
    pub fn params_mut(&mut self) -> Vec<(&mut Tensor, &mut Tensor)> {
        let mut out = Vec::new();
        for l in &mut self.conv_stack {
            out.push((&mut l.weights, &mut l.bias));
        }
        for (_, l) in &mut self.upsample {
            out.push((&mut l.weights, &mut l.bias));
        }
        out.push((&mut self.fusion.conv.weights, &mut self.fusion.conv.bias));
        out.push((&mut self.local.weights, &mut self.local.bias));
        for l in &mut self.dense {
            out.push((&mut l.weights, &mut l.bias));
        }
        out
    }

    /// `(weights, bias)` gradient pairs aligned with [`Self::params_mut`].
    pub fn grads_flat(grads: &CnnGrads) -> Vec<(&Tensor, &Tensor)> {
        let mut out = Vec::new();
        for b in &grads.conv {
            out.push((&b.grad_weights, &b.grad_bias));
        }
        for b in &grads.upsample {
            out.push((&b.grad_weights, &b.grad_bias));
        }
        out.push((&grads.fusion.grad_weights, &grads.fusion.grad_bias));
        out.push((&grads.local.grad_weights, &grads.local.grad_bias));
        for b in &grads.dense {
            out.push((&b.grad_weights, &b.grad_bias));
        }
        out
    }

    /// Sum of per-stage parameter counts.
    pub fn param_count(&self) -> usize {
        let conv: usize = self.conv_stack.iter().map(|l| l.param_count()).sum();
        let up: usize = self.upsample.iter().map(|(_, l)| l.param_count()).sum();
        let dense: usize = self.dense.iter().map(|l| l.param_count()).sum();
        conv + up + self.fusion.param_count() + self.local.param_count() + dense
    }

    /// Named stages for persistence, in `params_mut` order.
    pub fn stage_names(&self) -> Vec<String> {
        let mut out = Vec::new();
        for i in 0..self.conv_stack.len() {
            out.push(format!("conv_{i}"));
        }
        for (fi, _) in &self.upsample {
            out.push(format!("upsample_{fi}"));
        }
        out.push("fusion".into());
        out.push("local".into());
        for i in 0..self.dense.len() {
            out.push(format!("dense_{i}"));
        }
        out
    }
}

