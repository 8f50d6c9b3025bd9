//! Minibatch training with MSE loss, early stopping, and best-epoch
//! weight restoration.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{CnnModel, Network, OptimizerKind, TrainedModel};
use crate::datasets::{DemandDataset, SplitFractions, SplitLabel};
use crate::tensor::Tensor;
use crate::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainOptions {
    pub max_epochs: usize,
    /// Abort when validation loss fails to improve this many epochs in a row.
    pub patience: usize,
    pub fractions: SplitFractions,
    pub seed: u64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            max_epochs: 300,
            patience: 20,
            fractions: SplitFractions::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

struct Optimizer {
    kind: OptimizerKind,
    lr: f64,
    l2: f64,
    momentum: Vec<(Tensor, Tensor)>,
    second: Vec<(Tensor, Tensor)>,
    t: usize,
}

impl Optimizer {
    fn new(kind: OptimizerKind, lr: f64, l2: f64, shapes: &[(Vec<usize>, Vec<usize>)]) -> Self {
        let zeros = || -> Vec<(Tensor, Tensor)> {
            shapes
                .iter()
                .map(|(w, b)| (Tensor::zeros(w), Tensor::zeros(b)))
                .collect()
        };
        Optimizer {
            kind,
            lr,
            l2,
            momentum: zeros(),
            second: zeros(),
            t: 0,
        }
    }

    fn step(&mut self, params: Vec<(&mut Tensor, &mut Tensor)>, grads: &[(Tensor, Tensor)]) {
        self.t += 1;
        for (slot, ((w, b), (gw, gb))) in params.into_iter().zip(grads).enumerate() {
            // L2 regularization applies to weights, not biases.
            let reg: Vec<f64> = gw
                .data()
                .iter()
                .zip(w.data())
                .map(|(g, wv)| g + self.l2 * wv)
                .collect();
            self.step_tensor(slot, false, w, &reg);
            let gb_raw: Vec<f64> = gb.data().to_vec();
            self.step_tensor(slot, true, b, &gb_raw);
        }
    }

    fn step_tensor(&mut self, slot: usize, is_bias: bool, param: &mut Tensor, grad: &[f64]) {
        let lr = self.lr;
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, g) in param.data_mut().iter_mut().zip(grad) {
                    *p -= lr * g;
                }
            }
            OptimizerKind::Momentum => {
                let m = if is_bias {
                    &mut self.momentum[slot].1
                } else {
                    &mut self.momentum[slot].0
                };
                for ((p, g), mv) in param.data_mut().iter_mut().zip(grad).zip(m.data_mut()) {
                    *mv = 0.9 * *mv + g;
                    *p -= lr * *mv;
                }
            }
            OptimizerKind::Adam => {
                let (b1, b2, eps): (f64, f64, f64) = (0.9, 0.999, 1e-8);
                let bc1 = 1.0 - b1.powi(self.t as i32);
                let bc2 = 1.0 - b2.powi(self.t as i32);
                let (m, v) = if is_bias {
                    (&mut self.momentum[slot].1, &mut self.second[slot].1)
                } else {
                    (&mut self.momentum[slot].0, &mut self.second[slot].0)
                };
                for (((p, g), mv), vv) in param
                    .data_mut()
                    .iter_mut()
                    .zip(grad)
                    .zip(m.data_mut())
                    .zip(v.data_mut())
                {
                    *mv = b1 * *mv + (1.0 - b1) * g;
                    *vv = b2 * *vv + (1.0 - b2) * g * g;
                    let mhat = *mv / bc1;
                    let vhat = *vv / bc2;
                    *p -= lr * mhat / (vhat.sqrt() + eps);
                }
            }
        }
    }
}

fn param_shapes(net: &mut Network) -> Vec<(Vec<usize>, Vec<usize>)> {
    let params = match net {
        Network::Cnn(m) => m.params_mut(),
        Network::Mlp(m) => m.params_mut(),
    };
    params
        .iter()
        .map(|(w, b)| (w.shape().to_vec(), b.shape().to_vec()))
        .collect()
}

struct GradAccumulator {
    grads: Vec<(Tensor, Tensor)>,
    samples: usize,
}

impl GradAccumulator {
    fn new(shapes: &[(Vec<usize>, Vec<usize>)]) -> Self {
        GradAccumulator {
            grads: shapes
                .iter()
                .map(|(w, b)| (Tensor::zeros(w), Tensor::zeros(b)))
                .collect(),
            samples: 0,
        }
    }

    fn add(&mut self, sample: &[(&Tensor, &Tensor)]) {
        for ((aw, ab), (gw, gb)) in self.grads.iter_mut().zip(sample) {
            for (a, g) in aw.data_mut().iter_mut().zip(gw.data()) {
                *a += g;
            }
            for (a, g) in ab.data_mut().iter_mut().zip(gb.data()) {
                *a += g;
            }
        }
        self.samples += 1;
    }

    fn into_mean(mut self) -> Vec<(Tensor, Tensor)> {
        let n = self.samples.max(1) as f64;
        for (w, b) in &mut self.grads {
            for v in w.data_mut() {
                *v /= n;
            }
            for v in b.data_mut() {
                *v /= n;
            }
        }
        self.grads
    }
}

/// One epoch of CNN minibatch updates; returns the mean train loss.
fn cnn_epoch(
    model: &mut TrainedModel,
    ds: &DemandDataset,
    order: &[usize],
    shapes: &[(Vec<usize>, Vec<usize>)],
    optimizer: &mut Optimizer,
    scale_target: &impl Fn(f64) -> f64,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    let batch_size = model.spec.batch_size.max(1);
    let dropout = model.spec.dropout;
    let mut loss_sum = 0.0;
    let mut loss_n = 0usize;
    for batch in order.chunks(batch_size) {
        let mut acc = GradAccumulator::new(shapes);
        for &i in batch {
            let target = ds.targets[i].map(scale_target);
            let cnn = match &model.net {
                Network::Cnn(m) => m,
                Network::Mlp(_) => unreachable!("cnn_epoch requires a CNN"),
            };
            let cache = cnn.forward_cached(
                &model.schema,
                &ds.instances[i],
                (dropout > 0.0).then_some((dropout, rng as &mut dyn rand::RngCore)),
            )?;
            let diff = cache.output.sub(&target)?;
            let n_cells = diff.len() as f64;
            loss_sum += diff.data().iter().map(|d| d * d).sum::<f64>() / n_cells;
            loss_n += 1;
            let grad_out = diff.scale(2.0 / n_cells);
            let grads = cnn.backward(&cache, &grad_out)?;
            acc.add(&CnnModel::grads_flat(&grads));
        }
        let mean = acc.into_mean();
        let cnn = match &mut model.net {
            Network::Cnn(m) => m,
            Network::Mlp(_) => unreachable!(),
        };
        optimizer.step(cnn.params_mut(), &mean);
    }
    Ok(loss_sum / loss_n.max(1) as f64)
}

/// One epoch of per-subregion MLP updates; returns the mean train loss.
fn mlp_epoch(
    model: &mut TrainedModel,
    ds: &DemandDataset,
    order: &[(usize, usize, usize)],
    shapes: &[(Vec<usize>, Vec<usize>)],
    optimizer: &mut Optimizer,
    scale_target: &impl Fn(f64) -> f64,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    let batch_size = model.spec.batch_size.max(1);
    let dropout = model.spec.dropout;
    let mut loss_sum = 0.0;
    let mut loss_n = 0usize;
    for batch in order.chunks(batch_size) {
        let mut acc = GradAccumulator::new(shapes);
        for &(i, r, c) in batch {
            let mlp = match &model.net {
                Network::Mlp(m) => m,
                Network::Cnn(_) => unreachable!("mlp_epoch requires an MLP"),
            };
            let x = mlp.subregion_input(&model.schema, &ds.instances[i], r, c)?;
            let target = scale_target(ds.targets[i].at(&[r, c]));
            let cache = mlp.forward_cell_cached(
                &x,
                (dropout > 0.0).then_some((dropout, rng as &mut dyn rand::RngCore)),
            )?;
            let diff = cache.output - target;
            loss_sum += diff * diff;
            loss_n += 1;
            let bundles = mlp.backward_cell(&cache, 2.0 * diff)?;
            let flat: Vec<(&Tensor, &Tensor)> = bundles
                .iter()
                .map(|b| (&b.grad_weights, &b.grad_bias))
                .collect();
            acc.add(&flat);
        }
        let mean = acc.into_mean();
        let mlp = match &mut model.net {
            Network::Mlp(m) => m,
            Network::Cnn(_) => unreachable!(),
        };
        optimizer.step(mlp.params_mut(), &mean);
    }
    Ok(loss_sum / loss_n.max(1) as f64)
}

/// Trains the model: minibatch gradient descent with the spec's optimizer,
/// stopping at `max_epochs` or when validation loss stalls for `patience`
/// consecutive epochs, then restoring the best-validation-epoch weights.
///
/// Minibatch order reshuffles every epoch from the run seed.
pub fn train(
    mut model: TrainedModel,
    ds: &DemandDataset,
    opts: &TrainOptions,
) -> Result<TrainedModel> {
    if ds.split.len() != ds.len() {
        return Err(Error::Argument(
            "dataset has no split labels; split it first".into(),
        ));
    }
    let train_idx = ds.indices(SplitLabel::Train);
    let val_idx = ds.indices(SplitLabel::Val);
    if train_idx.is_empty() || val_idx.is_empty() {
        return Err(Error::Argument(
            "train and validation splits must be non-empty".into(),
        ));
    }
    model.scaler = ds.scaler.clone();
    let scaler = ds.scaler.clone();
    let scale_target = move |y: f64| match &scaler {
        Some(s) => s.scale_target(y),
        None => y,
    };

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let shapes = param_shapes(&mut model.net);
    let mut optimizer = Optimizer::new(
        model.spec.optimizer,
        model.spec.learning_rate,
        model.spec.l2,
        &shapes,
    );
    let mlp_cells: Vec<(usize, usize, usize)> = train_idx
        .iter()
        .flat_map(|&i| (0..ds.schema.q).flat_map(move |r| (0..ds.schema.p).map(move |c| (i, r, c))))
        .collect();

    let mut best_val = f64::INFINITY;
    let mut best_net: Option<Network> = None;
    let mut stale_epochs = 0usize;
    model.history.clear();

    for epoch in 0..opts.max_epochs {
        let train_loss = match &model.net {
            Network::Cnn(_) => {
                let mut order = train_idx.clone();
                order.shuffle(&mut rng);
                cnn_epoch(&mut model, ds, &order, &shapes, &mut optimizer, &scale_target, &mut rng)?
            }
            Network::Mlp(_) => {
                let mut order = mlp_cells.clone();
                order.shuffle(&mut rng);
                mlp_epoch(&mut model, ds, &order, &shapes, &mut optimizer, &scale_target, &mut rng)?
            }
        };
        let val_loss = split_loss(&model, ds, &val_idx, &scale_target)?;
        if !train_loss.is_finite() || !val_loss.is_finite() {
            return Err(Error::TrainingDiverged { epoch });
        }
        model.history.push(EpochStats {
            epoch,
            train_loss,
            val_loss,
        });
        if val_loss < best_val {
            best_val = val_loss;
            best_net = Some(model.net.clone());
            stale_epochs = 0;
        } else {
            stale_epochs += 1;
            if stale_epochs >= opts.patience {
                break;
            }
        }
    }
    if let Some(net) = best_net {
        model.net = net;
    }
    Ok(model)
}

/// Mean MSE in model space over the given instances; dropout disabled.
pub fn split_loss(
    model: &TrainedModel,
    ds: &DemandDataset,
    indices: &[usize],
    scale_target: &impl Fn(f64) -> f64,
) -> Result<f64> {
    let mut sum = 0.0;
    for &i in indices {
        let pred = model.predict(&ds.instances[i])?;
        let target = ds.targets[i].map(scale_target);
        let diff = pred.sub(&target)?;
        sum += diff.data().iter().map(|d| d * d).sum::<f64>() / diff.len() as f64;
    }
    Ok(sum / indices.len().max(1) as f64)
}
