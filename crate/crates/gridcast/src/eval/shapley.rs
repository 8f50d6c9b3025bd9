//! Monte-Carlo permutation Shapley attribution.
//!
//! For each sampled permutation paired with a background sample, features
//! before the target feature take the instance's values and the rest the
//! background's; a feature's value is its mean marginal contribution. The
//! base value is the mean model output over the background set, so the
//! contributions telescope to `f(x) - base` per permutation.

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::datasets::{DemandDataset, FeatureValue, Instance, SplitLabel};
use crate::model::TrainedModel;
use crate::{Error, Result};

/// What scalar a heatmap prediction is reduced to for attribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttributionTarget {
    /// Sum over all subregions of the predicted heatmap.
    HeatmapTotal,
    /// One subregion's predicted value.
    Cell(usize, usize),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttributionConfig {
    /// Training periods forming the base-value background.
    pub background_size: usize,
    /// Test periods attributed in a report.
    pub eval_samples: usize,
    /// Monte-Carlo permutations per attributed sample; 0 runs every
    /// permutation against every background sample (exhaustive).
    pub permutations: usize,
    pub seed: u64,
    pub target: AttributionTarget,
}

impl Default for AttributionConfig {
    fn default() -> Self {
        AttributionConfig {
            background_size: 300,
            eval_samples: 50,
            permutations: 64,
            seed: 0,
            target: AttributionTarget::HeatmapTotal,
        }
    }
}

/// Per-feature Shapley values of one prediction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Attribution {
    pub base_value: f64,
    pub phi: Vec<f64>,
    pub prediction: f64,
}

fn permutations_of(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current: Vec<usize> = (0..n).collect();
    fn heap(k: usize, arr: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if k <= 1 {
            out.push(arr.clone());
            return;
        }
        for i in 0..k {
            heap(k - 1, arr, out);
            if k % 2 == 0 {
                arr.swap(i, k - 1);
            } else {
                arr.swap(0, k - 1);
            }
        }
    }
    heap(n, &mut current, &mut out);
    out
}

/// Core permutation estimator over opaque feature payloads.
///
/// `permutations = 0` enumerates all `n!` permutations against every
/// background sample, which makes the efficiency identity exact.
pub fn permutation_shapley(
    f: &mut dyn FnMut(&[FeatureValue]) -> Result<f64>,
    instance: &[FeatureValue],
    background: &[Vec<FeatureValue>],
    permutations: usize,
    rng: &mut impl Rng,
) -> Result<Attribution> {
    if background.is_empty() {
        return Err(Error::Argument("shapley needs a non-empty background".into()));
    }
    let n = instance.len();
    let mut phi = vec![0.0; n];
    let mut draws = 0usize;

    let mut accumulate = |perm: &[usize], bg: &[FeatureValue], phi: &mut [f64]| -> Result<()> {
        let mut composite = bg.to_vec();
        let mut prev = f(&composite)?;
        for &j in perm {
            composite[j] = instance[j].clone();
            let next = f(&composite)?;
            phi[j] += next - prev;
            prev = next;
        }
        Ok(())
    };

    if permutations == 0 {
        for perm in permutations_of(n) {
            for bg in background {
                accumulate(&perm, bg, &mut phi)?;
                draws += 1;
            }
        }
    } else {
        let mut perm: Vec<usize> = (0..n).collect();
        for _ in 0..permutations {
            perm.shuffle(rng);
            let bg = &background[rng.random_range(0..background.len())];
            accumulate(&perm, bg, &mut phi)?;
            draws += 1;
        }
    }
    for v in &mut phi {
        *v /= draws as f64;
    }
    let mut base = 0.0;
    for bg in background {
        base += f(bg)?;
    }
    base /= background.len() as f64;
    Ok(Attribution {
        base_value: base,
        phi,
        prediction: f(instance)?,
    })
}

fn scalarize(model: &TrainedModel, values: &[FeatureValue], target: AttributionTarget) -> Result<f64> {
    let instance = Instance {
        values: values.to_vec(),
    };
    let heat = model.predict_demand(&instance)?;
    Ok(match target {
        AttributionTarget::HeatmapTotal => heat.sum(),
        AttributionTarget::Cell(i, j) => heat.at(&[i, j]),
    })
}

/// Shapley values of one model prediction against a background set.
pub fn shapley_for_model(
    model: &TrainedModel,
    instance: &Instance,
    background: &[Instance],
    permutations: usize,
    target: AttributionTarget,
    rng: &mut impl Rng,
) -> Result<Attribution> {
    let bg: Vec<Vec<FeatureValue>> = background.iter().map(|b| b.values.clone()).collect();
    let mut f = |values: &[FeatureValue]| scalarize(model, values, target);
    permutation_shapley(&mut f, &instance.values, &bg, permutations, rng)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttributionRow {
    pub feature: String,
    /// Signed mean Shapley value over the attributed samples.
    pub mean_phi: f64,
    /// Mean absolute Shapley value (the importance score).
    pub mean_abs_phi: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttributionTable {
    pub base_value: f64,
    pub n_samples: usize,
    pub rows: Vec<AttributionRow>,
}

/// Attribution over randomly drawn test periods with a train-split
/// background, pooled per feature into signed and absolute means.
pub fn attribution_report(
    model: &TrainedModel,
    ds: &DemandDataset,
    config: &AttributionConfig,
) -> Result<AttributionTable> {
    let train = ds.indices(SplitLabel::Train);
    let test = ds.indices(SplitLabel::Test);
    if train.is_empty() || test.is_empty() {
        return Err(Error::Argument("attribution needs train and test splits".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut background: Vec<Instance> = Vec::new();
    for _ in 0..config.background_size.min(train.len()) {
        let i = train[rng.random_range(0..train.len())];
        background.push(ds.instances[i].clone());
    }
    let n_features = ds.schema.features.len();
    let mut sum = vec![0.0; n_features];
    let mut sum_abs = vec![0.0; n_features];
    let mut base_sum = 0.0;
    let samples = config.eval_samples.min(test.len());
    for s in 0..samples {
        let i = test[rng.random_range(0..test.len())];
        // derived per-sample seed keeps samples independently reproducible
        let mut sample_rng = ChaCha8Rng::seed_from_u64(config.seed ^ (s as u64).wrapping_mul(0x9e3779b97f4a7c15));
        let attribution = shapley_for_model(
            model,
            &ds.instances[i],
            &background,
            config.permutations,
            config.target,
            &mut sample_rng,
        )?;
        for (k, v) in attribution.phi.iter().enumerate() {
            sum[k] += v;
            sum_abs[k] += v.abs();
        }
        base_sum += attribution.base_value;
    }
    let rows = ds
        .schema
        .features
        .iter()
        .enumerate()
        .map(|(k, f)| AttributionRow {
            feature: f.name.clone(),
            mean_phi: sum[k] / samples as f64,
            mean_abs_phi: sum_abs[k] / samples as f64,
        })
        .collect();
    Ok(AttributionTable {
        base_value: base_sum / samples as f64,
        n_samples: samples,
        rows,
    })
}
