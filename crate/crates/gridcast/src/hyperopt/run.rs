//! Expected improvement and the three Bayesian-optimization runners:
//! basic, dimension dropout, and hierarchical.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::gp::{gp_fit_with_options, GpFitOptions, GpParams, GpSurrogate};
use super::space::{
    encode, sample_random, theta_to_json, Provenance, SearchSpace, Theta, Trial,
};
use crate::trees::{fit_forest_configured, Forest, ForestMode};
use crate::{Error, Result};

// ---------------------------------------------------------------------------
// Normal distribution helpers
// ---------------------------------------------------------------------------

/// Abramowitz-Stegun 7.1.26 rational approximation, absolute error < 1.5e-7.
fn erf(x: f64) -> f64 {
    let sign = if x < 0.0 { -1.0 } else { 1.0 };
    let x = x.abs();
    let t = 1.0 / (1.0 + 0.3275911 * x);
    let poly = ((((1.061405429 * t - 1.453152027) * t) + 1.421413741) * t - 0.284496736) * t
        + 0.254829592;
    sign * (1.0 - poly * t * (-x * x).exp())
}

pub fn normal_cdf(z: f64) -> f64 {
    0.5 * (1.0 + erf(z / std::f64::consts::SQRT_2))
}

pub fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Expected improvement of a normally distributed outcome over the best
/// observed value `f_star` (minimization):
/// `(f*-mu) * Phi((f*-mu)/sigma) + sigma * phi((f*-mu)/sigma)`.
///
/// At `sigma = 0` this degenerates to `max(f* - mu, 0)`.
pub fn expected_improvement(mu: f64, sigma: f64, f_star: f64) -> f64 {
    if sigma <= 0.0 {
        return (f_star - mu).max(0.0);
    }
    let z = (f_star - mu) / sigma;
    ((f_star - mu) * normal_cdf(z) + sigma * normal_pdf(z)).max(0.0)
}

// ---------------------------------------------------------------------------
// Surrogates
// ---------------------------------------------------------------------------

/// Anything that yields `(mu, sigma)` on encoded points.
pub trait SurrogateModel {
    fn predict_mu_sigma(&self, x: &[f64]) -> (f64, f64);
}

impl SurrogateModel for GpSurrogate {
    fn predict_mu_sigma(&self, x: &[f64]) -> (f64, f64) {
        self.predict(x)
    }
}

/// Tree-ensemble surrogate: forest mean and the standard deviation of the
/// member trees' predictions.
pub struct ForestSurrogate {
    pub forest: Forest,
}

impl SurrogateModel for ForestSurrogate {
    fn predict_mu_sigma(&self, x: &[f64]) -> (f64, f64) {
        let (mu, var) = self.forest.mean_var(x);
        (mu, var.sqrt())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurrogateKind {
    Gp,
    RandomForest,
    ExtraTrees,
}

const SURROGATE_TREES: usize = 50;
const SURROGATE_DEPTH: usize = 16;

/// Per-run surrogate bookkeeping: Gaussian processes keep their fitted
/// hyperparameters warm and redo the likelihood search periodically.
struct SurrogateState {
    kind: SurrogateKind,
    warm: Option<GpParams>,
    refit_every: usize,
    gp_options: GpFitOptions,
}

impl SurrogateState {
    fn new(kind: SurrogateKind, options: &BoOptions) -> Self {
        SurrogateState {
            kind,
            warm: None,
            refit_every: options.refit_every.max(1),
            gp_options: options.gp.clone(),
        }
    }

    fn fit(
        &mut self,
        x: &[Vec<f64>],
        y: &[f64],
        bo_iteration: usize,
        rng: &mut impl Rng,
    ) -> Result<Box<dyn SurrogateModel>> {
        match self.kind {
            SurrogateKind::Gp => {
                let full_search = self.warm.is_none() || bo_iteration % self.refit_every == 0;
                let gp = if full_search {
                    let fit = gp_fit_with_options(x, y, self.warm.as_ref(), &self.gp_options, rng)?;
                    self.warm = Some(fit.params.clone());
                    fit
                } else {
                    GpSurrogate::fit_given(x, y, self.warm.clone().unwrap())?
                };
                Ok(Box::new(gp))
            }
            SurrogateKind::RandomForest | SurrogateKind::ExtraTrees => {
                let mode = if self.kind == SurrogateKind::RandomForest {
                    ForestMode::Bagging
                } else {
                    ForestMode::Extra
                };
                let forest = fit_forest_configured(
                    x,
                    y,
                    SURROGATE_TREES,
                    SURROGATE_DEPTH,
                    1,
                    mode,
                    1.0,
                    rng,
                )?;
                Ok(Box::new(ForestSurrogate { forest }))
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Acquisition optimization
// ---------------------------------------------------------------------------

/// Draws `candidates` random points, scores expected improvement, and
/// returns the arg-max; ties keep the first candidate in draw order.
pub fn propose_next(
    surrogate: &dyn SurrogateModel,
    space: &SearchSpace,
    f_star: f64,
    candidates: usize,
    rng: &mut impl Rng,
) -> Result<Theta> {
    if candidates == 0 {
        return Err(Error::Argument("propose_next needs >= 1 candidate".into()));
    }
    let mut best: Option<(f64, Theta)> = None;
    for _ in 0..candidates {
        let theta = sample_random(space, rng);
        let enc = encode(&theta, space)?;
        let (mu, sigma) = surrogate.predict_mu_sigma(&enc);
        let ei = expected_improvement(mu, sigma, f_star);
        if best.as_ref().map_or(true, |(b, _)| ei > *b) {
            best = Some((ei, theta));
        }
    }
    Ok(best.unwrap().1)
}

// ---------------------------------------------------------------------------
// Runners
// ---------------------------------------------------------------------------

/// Effort knobs shared by the runners.
#[derive(Debug, Clone)]
pub struct BoOptions {
    /// Candidate points drawn per acquisition optimization.
    pub candidates: usize,
    /// Full likelihood search every this many BO iterations (GP only).
    pub refit_every: usize,
    pub gp: GpFitOptions,
}

impl Default for BoOptions {
    fn default() -> Self {
        BoOptions {
            candidates: 1000,
            refit_every: 5,
            gp: GpFitOptions::default(),
        }
    }
}

/// Outcome of a tuning run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TuneResult {
    pub trials: Vec<Trial>,
    /// Index of the incumbent (lowest valid objective) in `trials`.
    pub incumbent: usize,
}

impl TuneResult {
    pub fn incumbent_trial(&self) -> &Trial {
        &self.trials[self.incumbent]
    }

    pub fn best_value(&self) -> f64 {
        self.trials[self.incumbent].value
    }

    /// Best-so-far value after each trial; non-increasing by construction.
    pub fn best_so_far(&self) -> Vec<f64> {
        let mut best = f64::INFINITY;
        self.trials
            .iter()
            .map(|t| {
                if !t.failed {
                    best = best.min(t.value);
                }
                best
            })
            .collect()
    }
}

fn finalize(trials: Vec<Trial>) -> Result<TuneResult> {
    let incumbent = trials
        .iter()
        .enumerate()
        .filter(|(_, t)| !t.failed)
        .min_by(|(_, a), (_, b)| a.value.partial_cmp(&b.value).unwrap())
        .map(|(i, _)| i)
        .ok_or_else(|| Error::Numeric("every objective evaluation failed".into()))?;
    Ok(TuneResult { trials, incumbent })
}

type Objective<'a> = dyn FnMut(&Theta) -> Result<f64> + 'a;

/// Evaluates one theta. Failures are recorded with ten times the worst
/// observed value, excluded from surrogates and from the incumbent.
fn run_trial(
    objective: &mut Objective,
    theta: Theta,
    iteration: usize,
    provenance: Provenance,
    trials: &mut Vec<Trial>,
) {
    let outcome = objective(&theta);
    let trial = match outcome {
        Ok(v) if v.is_finite() => Trial {
            theta,
            value: v,
            iteration,
            provenance,
            failed: false,
        },
        _ => {
            let worst = trials
                .iter()
                .filter(|t| !t.failed)
                .map(|t| t.value)
                .fold(f64::NEG_INFINITY, f64::max);
            let penalty = if worst.is_finite() { worst * 10.0 } else { 1e30 };
            Trial {
                theta,
                value: penalty,
                iteration,
                provenance,
                failed: true,
            }
        }
    };
    trials.push(trial);
}

fn valid_xy(trials: &[Trial], space: &SearchSpace) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let mut x = Vec::new();
    let mut y = Vec::new();
    for t in trials.iter().filter(|t| !t.failed) {
        x.push(encode(&t.theta, space)?);
        y.push(t.value);
    }
    Ok((x, y))
}

fn best_valid(trials: &[Trial]) -> Option<f64> {
    trials
        .iter()
        .filter(|t| !t.failed)
        .map(|t| t.value)
        .min_by(|a, b| a.partial_cmp(b).unwrap())
}

/// Basic Bayesian optimization: `m` iterations of random search followed by
/// `n` iterations of fit / propose / evaluate.
pub fn bo_run(
    objective: &mut Objective,
    space: &SearchSpace,
    m: usize,
    n: usize,
    surrogate: SurrogateKind,
    rng: &mut impl Rng,
    options: &BoOptions,
) -> Result<TuneResult> {
    if m < 2 {
        return Err(Error::Argument(format!(
            "random-search initialization needs m >= 2, got {m}"
        )));
    }
    let mut trials = Vec::with_capacity(m + n);
    for it in 0..m {
        let theta = sample_random(space, rng);
        run_trial(objective, theta, it, Provenance::Random, &mut trials);
    }
    let mut state = SurrogateState::new(surrogate, options);
    for bo_it in 0..n {
        let iteration = m + bo_it;
        let (x, y) = valid_xy(&trials, space)?;
        let theta = if x.len() < 2 {
            sample_random(space, rng)
        } else {
            let model = state.fit(&x, &y, bo_it, rng)?;
            let f_star = best_valid(&trials).unwrap();
            propose_next(model.as_ref(), space, f_star, options.candidates, rng)?
        };
        run_trial(objective, theta, iteration, Provenance::Bo, &mut trials);
    }
    finalize(trials)
}

/// Bayesian optimization with dimension dropout.
///
/// Per iteration, `d = floor(d_tilde * |D|)` dimensions are drawn without
/// replacement and expected improvement is optimized over that subspace
/// with a Gaussian-process surrogate fitted to the projections of all past
/// trials. Left-out coordinates follow the Dropout-Mix rule: with
/// probability `p` fresh random values, otherwise the incumbent's.
#[allow(clippy::too_many_arguments)]
pub fn bo_dropout_run(
    objective: &mut Objective,
    space: &SearchSpace,
    m: usize,
    n: usize,
    d_tilde: f64,
    p: f64,
    rng: &mut impl Rng,
    options: &BoOptions,
) -> Result<TuneResult> {
    if m < 2 {
        return Err(Error::Argument(format!(
            "random-search initialization needs m >= 2, got {m}"
        )));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Argument(format!("dropout mix p must be in [0,1], got {p}")));
    }
    let total = space.len();
    let d = (d_tilde * total as f64).floor() as usize;
    if d < 1 || d >= total {
        return Err(Error::Argument(format!(
            "d_tilde {d_tilde} yields d = {d}, need 1 <= d < {total}"
        )));
    }
    let mut trials = Vec::with_capacity(m + n);
    for it in 0..m {
        let theta = sample_random(space, rng);
        run_trial(objective, theta, it, Provenance::Random, &mut trials);
    }
    for bo_it in 0..n {
        let iteration = m + bo_it;
        let drawn = draw_without_replacement(total, d, rng);
        let subspace = space.project(&drawn);
        let valid: Vec<&Trial> = trials.iter().filter(|t| !t.failed).collect();
        let theta = if valid.len() < 2 {
            sample_random(space, rng)
        } else {
            let x: Vec<Vec<f64>> = valid
                .iter()
                .map(|t| {
                    let sub: Theta = drawn.iter().map(|&i| t.theta[i].clone()).collect();
                    encode(&sub, &subspace)
                })
                .collect::<Result<_>>()?;
            let y: Vec<f64> = valid.iter().map(|t| t.value).collect();
            // fresh subspace GP per iteration, as the dropout scheme requires
            let gp = gp_fit_with_options(&x, &y, None, &options.gp, rng)?;
            let f_star = best_valid(&trials).unwrap();
            let sub_theta = propose_next(&gp, &subspace, f_star, options.candidates, rng)?;
            let incumbent = finalize_peek(&trials)?;
            let mut theta = if rng.random_bool(p) {
                sample_random(space, rng)
            } else {
                trials[incumbent].theta.clone()
            };
            for (slot, &dim_index) in drawn.iter().enumerate() {
                theta[dim_index] = sub_theta[slot].clone();
            }
            theta
        };
        run_trial(objective, theta, iteration, Provenance::Dropout, &mut trials);
    }
    finalize(trials)
}

fn finalize_peek(trials: &[Trial]) -> Result<usize> {
    trials
        .iter()
        .enumerate()
        .filter(|(_, t)| !t.failed)
        .min_by(|(_, a), (_, b)| a.value.partial_cmp(&b.value).unwrap())
        .map(|(i, _)| i)
        .ok_or_else(|| Error::Numeric("no valid trials".into()))
}

fn draw_without_replacement(n: usize, k: usize, rng: &mut impl Rng) -> Vec<usize> {
    let mut pool: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = rng.random_range(i..n);
        pool.swap(i, j);
    }
    let mut picked = pool[..k].to_vec();
    picked.sort_unstable();
    picked
}

// ---------------------------------------------------------------------------
// Hierarchical decomposition
// ---------------------------------------------------------------------------

/// One disjoint set of search dimensions with its own budgets and surrogate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PartitionSet {
    pub name: String,
    /// Dimension names belonging to this set.
    pub dims: Vec<String>,
    /// Random-search evaluations before BO starts within the set.
    pub random_budget: usize,
    /// BO iterations within the set.
    pub bo_budget: usize,
    pub surrogate: SurrogateKind,
}

/// Ordered disjoint partition of the search dimensions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Partition {
    pub sets: Vec<PartitionSet>,
}

/// Every dimension must be assigned to exactly one set; the error lists
/// unknown, missing, and duplicated dimension names.
pub fn validate_partition(partition: &Partition, space: &SearchSpace) -> Result<()> {
    let mut counts: BTreeMap<&str, usize> = space
        .dims()
        .iter()
        .map(|d| (d.name.as_str(), 0usize))
        .collect();
    for set in &partition.sets {
        for name in &set.dims {
            match counts.get_mut(name.as_str()) {
                Some(c) => *c += 1,
                None => {
                    return Err(Error::Partition(format!(
                        "set '{}' references unknown dimension '{name}'",
                        set.name
                    )))
                }
            }
        }
    }
    let missing: Vec<&str> = counts
        .iter()
        .filter(|(_, &c)| c == 0)
        .map(|(&n, _)| n)
        .collect();
    let duplicated: Vec<&str> = counts
        .iter()
        .filter(|(_, &c)| c > 1)
        .map(|(&n, _)| n)
        .collect();
    if !missing.is_empty() || !duplicated.is_empty() {
        let mut parts = Vec::new();
        if !missing.is_empty() {
            parts.push(format!("missing: {}", missing.join(", ")));
        }
        if !duplicated.is_empty() {
            parts.push(format!("duplicated: {}", duplicated.join(", ")));
        }
        return Err(Error::Partition(parts.join("; ")));
    }
    Ok(())
}

/// Hierarchical Bayesian optimization over a disjoint partition.
///
/// After `init` global random-search evaluations, each set is optimized in
/// order with all other coordinates fixed to the incumbent's values; the
/// incumbent is merged and updated after every evaluation.
pub fn hierarchical_bo_run(
    objective: &mut Objective,
    space: &SearchSpace,
    partition: &Partition,
    init: usize,
    rng: &mut impl Rng,
    options: &BoOptions,
) -> Result<TuneResult> {
    validate_partition(partition, space)?;
    if init < 1 {
        return Err(Error::Argument(
            "hierarchical BO needs >= 1 global random initialization".into(),
        ));
    }
    let mut trials: Vec<Trial> = Vec::new();
    let mut iteration = 0usize;
    for _ in 0..init {
        let theta = sample_random(space, rng);
        run_trial(objective, theta, iteration, Provenance::Random, &mut trials);
        iteration += 1;
    }
    finalize_peek(&trials)?; // at least one valid trial to seed the incumbent

    for (level, set) in partition.sets.iter().enumerate() {
        // Indices in space order so projections are deterministic.
        let mut indices: Vec<usize> = set
            .dims
            .iter()
            .map(|n| space.index_of(n).expect("validated"))
            .collect();
        indices.sort_unstable();
        let subspace = space.project(&indices);
        let fixed = trials[finalize_peek(&trials)?].theta.clone();

        for _ in 0..set.random_budget {
            let mut theta = fixed.clone();
            for &i in &indices {
                theta[i] = space.dims()[i].sample(rng);
            }
            run_trial(objective, theta, iteration, Provenance::Hier(level), &mut trials);
            iteration += 1;
        }

        let mut state = SurrogateState::new(set.surrogate, options);
        for bo_it in 0..set.bo_budget {
            let valid: Vec<&Trial> = trials.iter().filter(|t| !t.failed).collect();
            let theta = if valid.len() < 2 {
                let mut theta = fixed.clone();
                for &i in &indices {
                    theta[i] = space.dims()[i].sample(rng);
                }
                theta
            } else {
                let x: Vec<Vec<f64>> = valid
                    .iter()
                    .map(|t| {
                        let sub: Theta = indices.iter().map(|&i| t.theta[i].clone()).collect();
                        encode(&sub, &subspace)
                    })
                    .collect::<Result<_>>()?;
                let y: Vec<f64> = valid.iter().map(|t| t.value).collect();
                let model = state.fit(&x, &y, bo_it, rng)?;
                let f_star = best_valid(&trials).unwrap();
                let sub_theta =
                    propose_next(model.as_ref(), &subspace, f_star, options.candidates, rng)?;
                let mut theta = fixed.clone();
                for (slot, &i) in indices.iter().enumerate() {
                    theta[i] = sub_theta[slot].clone();
                }
                theta
            };
            run_trial(objective, theta, iteration, Provenance::Hier(level), &mut trials);
            iteration += 1;
        }
    }
    finalize(trials)
}

// ---------------------------------------------------------------------------
// Trace emission
// ---------------------------------------------------------------------------

/// CSV trace: `iteration,provenance,value,best_so_far,theta_json`.
pub fn trace_csv(space: &SearchSpace, trials: &[Trial]) -> String {
    let mut out = String::from("iteration,provenance,value,best_so_far,theta_json\n");
    let mut best = f64::INFINITY;
    for t in trials {
        if !t.failed {
            best = best.min(t.value);
        }
        let theta = theta_to_json(space, &t.theta).to_string().replace('"', "\"\"");
        let best_cell = if best.is_finite() {
            format!("{best}")
        } else {
            String::new()
        };
        out.push_str(&format!(
            "{},{},{},{},\"{}\"\n",
            t.iteration, t.provenance, t.value, best_cell, theta
        ));
    }
    out
}
