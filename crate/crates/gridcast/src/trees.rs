//! CART regression trees, random forests, and extremely randomized trees.
//!
//! The same ensembles serve three roles: benchmark predictors on tabular
//! demand rows, surrogate models inside Bayesian optimization (mean and
//! variance over member trees), and intrinsic feature-selection reporters
//! (which features split, and how shallow).

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// One tree node: either an axis-aligned split or a mean-value leaf.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

/// Greedy variance-reduction regression tree.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegressionTree {
    pub nodes: Vec<Node>,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
}

/// Ensemble mode: bootstrap bagging or extremely randomized thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForestMode {
    Bagging,
    Extra,
}

/// Forest of regression trees; the prediction is the mean over members.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<RegressionTree>,
    pub mode: ForestMode,
    pub feature_subsample: f64,
}

struct FitContext<'a> {
    x: &'a [Vec<f64>],
    y: &'a [f64],
    max_depth: usize,
    min_samples_leaf: usize,
    /// Fraction of features drawn per split; 1.0 considers all.
    feature_fraction: f64,
    /// Extra-trees mode: one uniform random threshold per candidate feature.
    random_thresholds: bool,
}

/// Fits a regression tree by greedy best-split on sum-of-squares reduction.
///
/// Split candidates are midpoints between consecutive sorted unique feature
/// values. Ties break on the lowest feature index, then lowest threshold.
pub fn fit_tree(
    x: &[Vec<f64>],
    y: &[f64],
    max_depth: usize,
    min_samples_leaf: usize,
    rng: &mut impl Rng,
) -> Result<RegressionTree> {
    fit_tree_configured(x, y, max_depth, min_samples_leaf, 1.0, false, rng)
}

#[allow(clippy::too_many_arguments)]
pub fn fit_tree_configured(
    x: &[Vec<f64>],
    y: &[f64],
    max_depth: usize,
    min_samples_leaf: usize,
    feature_fraction: f64,
    random_thresholds: bool,
    rng: &mut impl Rng,
) -> Result<RegressionTree> {
    if x.is_empty() || x.len() != y.len() {
        return Err(Error::Argument(format!(
            "tree fit requires matching non-empty rows: |X|={}, |y|={}",
            x.len(),
            y.len()
        )));
    }
    if min_samples_leaf == 0 {
        return Err(Error::Argument("min_samples_leaf must be >= 1".into()));
    }
    let ctx = FitContext {
        x,
        y,
        max_depth,
        min_samples_leaf,
        feature_fraction,
        random_thresholds,
    };
    let mut nodes = Vec::new();
    let indices: Vec<usize> = (0..x.len()).collect();
    build_node(&ctx, &indices, 0, &mut nodes, rng);
    Ok(RegressionTree {
        nodes,
        max_depth,
        min_samples_leaf,
    })
}

fn mean(y: &[f64], idx: &[usize]) -> f64 {
    idx.iter().map(|&i| y[i]).sum::<f64>() / idx.len() as f64
}

fn build_node(
    ctx: &FitContext,
    idx: &[usize],
    depth: usize,
    nodes: &mut Vec<Node>,
    rng: &mut impl Rng,
) -> usize {
    let node_id = nodes.len();
    let leaf_value = mean(ctx.y, idx);
    if depth >= ctx.max_depth || idx.len() < 2 * ctx.min_samples_leaf {
        nodes.push(Node::Leaf { value: leaf_value });
        return node_id;
    }
    match best_split(ctx, idx, rng) {
        Some((feature, threshold)) => {
            nodes.push(Node::Leaf { value: leaf_value }); // placeholder
            let (left_idx, right_idx): (Vec<usize>, Vec<usize>) =
                idx.iter().partition(|&&i| ctx.x[i][feature] < threshold);
            let left = build_node(ctx, &left_idx, depth + 1, nodes, rng);
            let right = build_node(ctx, &right_idx, depth + 1, nodes, rng);
            nodes[node_id] = Node::Split {
                feature,
                threshold,
                left,
                right,
            };
            node_id
        }
        None => {
            nodes.push(Node::Leaf { value: leaf_value });
            node_id
        }
    }
}

/// Best split over (sub-sampled) features by SSE reduction.
fn best_split(ctx: &FitContext, idx: &[usize], rng: &mut impl Rng) -> Option<(usize, f64)> {
    let n_features = ctx.x[0].len();
    let candidate_features: Vec<usize> = if ctx.feature_fraction >= 1.0 {
        (0..n_features).collect()
    } else {
        let k = ((n_features as f64 * ctx.feature_fraction).ceil() as usize).clamp(1, n_features);
        sample_without_replacement(n_features, k, rng)
    };

    let total_sum: f64 = idx.iter().map(|&i| ctx.y[i]).sum();
    let total_sq: f64 = idx.iter().map(|&i| ctx.y[i] * ctx.y[i]).sum();
    let n = idx.len() as f64;
    let parent_sse = total_sq - total_sum * total_sum / n;
    if parent_sse <= 1e-12 {
        return None;
    }

    let mut best: Option<(f64, usize, f64)> = None; // (gain, feature, threshold)
    let mut consider = |gain: f64, feature: usize, threshold: f64| {
        let better = match &best {
            None => true,
            Some((bg, bf, bt)) => {
                gain > *bg + 1e-12
                    || ((gain - bg).abs() <= 1e-12
                        && (feature < *bf || (feature == *bf && threshold < *bt)))
            }
        };
        if better {
            best = Some((gain, feature, threshold));
        }
    };

    for &f in &candidate_features {
        let mut order: Vec<usize> = idx.to_vec();
        order.sort_by(|&a, &b| ctx.x[a][f].partial_cmp(&ctx.x[b][f]).unwrap());
        let lo = ctx.x[order[0]][f];
        let hi = ctx.x[order[order.len() - 1]][f];
        if hi <= lo {
            continue; // constant feature on this node
        }
        if ctx.random_thresholds {
            let threshold = rng.random_range(lo..hi);
            if let Some(gain) =
                split_gain(ctx, &order, f, threshold, total_sum, total_sq, parent_sse)
            {
                consider(gain, f, threshold);
            }
        } else {
            // Midpoints between consecutive sorted unique values, evaluated
            // with prefix sums over the sorted order.
            let mut left_sum = 0.0;
            let mut left_sq = 0.0;
            for w in 0..order.len() - 1 {
                let yi = ctx.y[order[w]];
                left_sum += yi;
                left_sq += yi * yi;
                let a = ctx.x[order[w]][f];
                let b = ctx.x[order[w + 1]][f];
                if b <= a {
                    continue;
                }
                let n_left = w + 1;
                let n_right = order.len() - n_left;
                if n_left < ctx.min_samples_leaf || n_right < ctx.min_samples_leaf {
                    continue;
                }
                let threshold = a + (b - a) / 2.0;
                let right_sum = total_sum - left_sum;
                let right_sq = total_sq - left_sq;
                let sse_left = left_sq - left_sum * left_sum / n_left as f64;
                let sse_right = right_sq - right_sum * right_sum / n_right as f64;
                consider(parent_sse - sse_left - sse_right, f, threshold);
            }
        }
    }
    best.filter(|(gain, _, _)| *gain > 1e-12)
        .map(|(_, f, t)| (f, t))
}

fn split_gain(
    ctx: &FitContext,
    order: &[usize],
    feature: usize,
    threshold: f64,
    total_sum: f64,
    total_sq: f64,
    parent_sse: f64,
) -> Option<f64> {
    let mut left_sum = 0.0;
    let mut left_sq = 0.0;
    let mut n_left = 0usize;
    for &i in order {
        if ctx.x[i][feature] < threshold {
            left_sum += ctx.y[i];
            left_sq += ctx.y[i] * ctx.y[i];
            n_left += 1;
        }
    }
    let n_right = order.len() - n_left;
    if n_left < ctx.min_samples_leaf || n_right < ctx.min_samples_leaf {
        return None;
    }
    let right_sum = total_sum - left_sum;
    let right_sq = total_sq - left_sq;
    let sse_left = left_sq - left_sum * left_sum / n_left as f64;
    let sse_right = right_sq - right_sum * right_sum / n_right as f64;
    Some(parent_sse - sse_left - sse_right)
}

fn sample_without_replacement(n: usize, k: usize, rng: &mut impl Rng) -> Vec<usize> {
    let mut pool: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = rng.random_range(i..n);
        pool.swap(i, j);
    }
    let mut picked = pool[..k].to_vec();
    picked.sort_unstable();
    picked
}

impl RegressionTree {
    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut at = 0usize;
        loop {
            match &self.nodes[at] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if row[*feature] < *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }

    /// Features used in any split, with the shallowest depth at which each
    /// one appears (root depth 0).
    pub fn selected_features(&self) -> BTreeMap<usize, usize> {
        let mut out = BTreeMap::new();
        fn walk(nodes: &[Node], at: usize, depth: usize, out: &mut BTreeMap<usize, usize>) {
            if let Node::Split {
                feature,
                left,
                right,
                ..
            } = &nodes[at]
            {
                let e = out.entry(*feature).or_insert(depth);
                if depth < *e {
                    *e = depth;
                }
                walk(nodes, *left, depth + 1, out);
                walk(nodes, *right, depth + 1, out);
            }
        }
        walk(&self.nodes, 0, 0, &mut out);
        out
    }
}

/// Fits an ensemble. Bagging bootstraps rows and sub-samples features per
/// split; extra mode keeps all rows and draws random thresholds.
pub fn fit_forest(
    x: &[Vec<f64>],
    y: &[f64],
    n_trees: usize,
    max_depth: usize,
    mode: ForestMode,
    rng: &mut impl Rng,
) -> Result<Forest> {
    let feature_subsample = match mode {
        ForestMode::Bagging => 1.0 / 3.0,
        ForestMode::Extra => 1.0,
    };
    fit_forest_configured(x, y, n_trees, max_depth, 1, mode, feature_subsample, rng)
}

/// Worker threads for forest fitting, from the `GRIDCAST_THREADS`
/// environment variable; anything unset or invalid means single-threaded.
fn fit_threads() -> usize {
    std::env::var("GRIDCAST_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n >= 1)
        .unwrap_or(1)
}

#[allow(clippy::too_many_arguments)]
pub fn fit_forest_configured(
    x: &[Vec<f64>],
    y: &[f64],
    n_trees: usize,
    max_depth: usize,
    min_samples_leaf: usize,
    mode: ForestMode,
    feature_subsample: f64,
    rng: &mut impl Rng,
) -> Result<Forest> {
    if n_trees == 0 {
        return Err(Error::Argument("forest needs n_trees >= 1".into()));
    }
    if x.is_empty() || x.len() != y.len() {
        return Err(Error::Argument(
            "forest fit requires matching non-empty rows".into(),
        ));
    }
    // Each tree owns a derived seed, so fits are identical no matter how
    // the work is distributed over threads.
    let seeds: Vec<u64> = (0..n_trees).map(|_| rng.random::<u64>()).collect();
    let fit_one = |seed: u64| -> Result<RegressionTree> {
        let mut tree_rng = ChaCha8Rng::seed_from_u64(seed);
        match mode {
            ForestMode::Bagging => {
                let picks: Vec<usize> = (0..x.len())
                    .map(|_| tree_rng.random_range(0..x.len()))
                    .collect();
                let bx: Vec<Vec<f64>> = picks.iter().map(|&i| x[i].clone()).collect();
                let by: Vec<f64> = picks.iter().map(|&i| y[i]).collect();
                fit_tree_configured(
                    &bx,
                    &by,
                    max_depth,
                    min_samples_leaf,
                    feature_subsample,
                    false,
                    &mut tree_rng,
                )
            }
            ForestMode::Extra => fit_tree_configured(
                x,
                y,
                max_depth,
                min_samples_leaf,
                feature_subsample,
                true,
                &mut tree_rng,
            ),
        }
    };

    let workers = fit_threads().min(n_trees);
    let trees: Vec<RegressionTree> = if workers <= 1 {
        seeds.iter().map(|&s| fit_one(s)).collect::<Result<_>>()?
    } else {
        let chunk = n_trees.div_ceil(workers);
        let results: Vec<Result<Vec<RegressionTree>>> = std::thread::scope(|scope| {
            let handles: Vec<_> = seeds
                .chunks(chunk)
                .map(|block| scope.spawn(|| block.iter().map(|&s| fit_one(s)).collect()))
                .collect();
            handles.into_iter().map(|h| h.join().unwrap()).collect()
        });
        let mut all = Vec::with_capacity(n_trees);
        for block in results {
            all.extend(block?);
        }
        all
    };
    Ok(Forest {
        trees,
        mode,
        feature_subsample,
    })
}

impl Forest {
    /// Mean over member trees.
    pub fn predict(&self, row: &[f64]) -> f64 {
        self.mean_var(row).0
    }

    /// Mean and population variance of per-tree predictions; the pair feeds
    /// expected improvement as `(mu, sigma^2)`.
    pub fn mean_var(&self, row: &[f64]) -> (f64, f64) {
        let n = self.trees.len() as f64;
        let mut sum = 0.0;
        for t in &self.trees {
            sum += t.predict(row);
        }
        let mean = sum / n;
        let mut var = 0.0;
        for t in &self.trees {
            let d = t.predict(row) - mean;
            var += d * d;
        }
        (mean, (var / n).max(0.0))
    }
}

// ---------------------------------------------------------------------------
// Grid search
// ---------------------------------------------------------------------------

/// Parameter grid for tree benchmarks.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TreeGrid {
    pub max_depths: Vec<usize>,
    pub min_samples_leafs: Vec<usize>,
    /// Ensemble sizes; `0` or absent entries mean a single tree.
    #[serde(default)]
    pub n_trees: Vec<usize>,
    #[serde(default = "default_mode")]
    pub mode: ForestMode,
}

fn default_mode() -> ForestMode {
    ForestMode::Bagging
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridSearchRow {
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub n_trees: usize,
    pub train_mse: f64,
    pub val_mse: f64,
    pub test_mse: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridSearchOutcome {
    pub rows: Vec<GridSearchRow>,
    /// Index into `rows` of the lowest-validation-MSE configuration.
    pub incumbent: usize,
}

/// Tabular split used by tree benchmarks: rows for train/val/test.
pub struct TabularSplit<'a> {
    pub train_x: &'a [Vec<f64>],
    pub train_y: &'a [f64],
    pub val_x: &'a [Vec<f64>],
    pub val_y: &'a [f64],
    pub test_x: &'a [Vec<f64>],
    pub test_y: &'a [f64],
}

fn rows_mse(pred: impl Fn(&[f64]) -> f64, x: &[Vec<f64>], y: &[f64]) -> f64 {
    if x.is_empty() {
        return f64::NAN;
    }
    let mut s = 0.0;
    for (row, &t) in x.iter().zip(y) {
        let d = pred(row) - t;
        s += d * d;
    }
    s / x.len() as f64
}

/// Exhaustive evaluation of the grid; the incumbent minimizes validation
/// MSE. The row table supports overfitting plots (train vs test per depth).
pub fn grid_search_trees(
    grid: &TreeGrid,
    data: &TabularSplit,
    seed: u64,
) -> Result<GridSearchOutcome> {
    if grid.max_depths.is_empty() || grid.min_samples_leafs.is_empty() {
        return Err(Error::Argument("empty tree grid".into()));
    }
    let ensemble_sizes: Vec<usize> = if grid.n_trees.is_empty() {
        vec![0]
    } else {
        grid.n_trees.clone()
    };
    let mut rows = Vec::new();
    for &depth in &grid.max_depths {
        for &leaf in &grid.min_samples_leafs {
            for &nt in &ensemble_sizes {
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ hash3(depth, leaf, nt));
                let (train_mse, val_mse, test_mse) = if nt == 0 {
                    let tree = fit_tree(data.train_x, data.train_y, depth, leaf, &mut rng)?;
                    (
                        rows_mse(|r| tree.predict(r), data.train_x, data.train_y),
                        rows_mse(|r| tree.predict(r), data.val_x, data.val_y),
                        rows_mse(|r| tree.predict(r), data.test_x, data.test_y),
                    )
                } else {
                    let forest = fit_forest_configured(
                        data.train_x,
                        data.train_y,
                        nt,
                        depth,
                        leaf,
                        grid.mode,
                        1.0 / 3.0,
                        &mut rng,
                    )?;
                    (
                        rows_mse(|r| forest.predict(r), data.train_x, data.train_y),
                        rows_mse(|r| forest.predict(r), data.val_x, data.val_y),
                        rows_mse(|r| forest.predict(r), data.test_x, data.test_y),
                    )
                };
                rows.push(GridSearchRow {
                    max_depth: depth,
                    min_samples_leaf: leaf,
                    n_trees: nt,
                    train_mse,
                    val_mse,
                    test_mse,
                });
            }
        }
    }
    let incumbent = rows
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| a.val_mse.partial_cmp(&b.val_mse).unwrap())
        .map(|(i, _)| i)
        .unwrap();
    Ok(GridSearchOutcome { rows, incumbent })
}

fn hash3(a: usize, b: usize, c: usize) -> u64 {
    let mut h = 0xcbf29ce484222325u64;
    for v in [a as u64, b as u64, c as u64] {
        h ^= v.wrapping_add(0x9e3779b97f4a7c15);
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}
