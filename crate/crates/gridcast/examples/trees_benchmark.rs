//! Tree benchmarks: grid search over depth and leaf size, the train/test
//! overfitting pattern, and the features an incumbent tree selects.
//!
//! Run with `cargo run --example trees_benchmark`.

use gridcast::datasets::{
    build_dataset, synth_generate, tabular_feature_names, to_tabular, SplitFractions, SplitLabel,
    SynthConfig,
};
use gridcast::trees::{fit_tree, grid_search_trees, ForestMode, TabularSplit, TreeGrid};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> gridcast::Result<()> {
    let config = SynthConfig {
        q: 4,
        p: 3,
        periods: 21 * 16,
        ..Default::default()
    };
    let out = synth_generate(&config, &mut ChaCha8Rng::seed_from_u64(3))?;
    let (ds, _) = build_dataset(
        &out.cube,
        &out.timeline,
        &out.grid,
        &out.externals,
        6,
        SplitFractions::default(),
        Some(0.8),
    )?;
    let (train_x, train_y) = to_tabular(&ds, SplitLabel::Train);
    let (val_x, val_y) = to_tabular(&ds, SplitLabel::Val);
    let (test_x, test_y) = to_tabular(&ds, SplitLabel::Test);
    println!("{} tabular training rows, {} features", train_x.len(), train_x[0].len());

    let grid = TreeGrid {
        max_depths: vec![1, 2, 3, 5, 8, 12],
        min_samples_leafs: vec![1, 4],
        n_trees: vec![0, 25], // 0 = single tree, 25 = bagged forest
        mode: ForestMode::Bagging,
    };
    let split = TabularSplit {
        train_x: &train_x,
        train_y: &train_y,
        val_x: &val_x,
        val_y: &val_y,
        test_x: &test_x,
        test_y: &test_y,
    };
    let outcome = grid_search_trees(&grid, &split, 7)?;
    println!("depth leaf trees | train MSE  val MSE   test MSE");
    for row in &outcome.rows {
        println!(
            "{:5} {:4} {:5} | {:9.4} {:9.4} {:9.4}",
            row.max_depth, row.min_samples_leaf, row.n_trees, row.train_mse, row.val_mse, row.test_mse
        );
    }
    let incumbent = &outcome.rows[outcome.incumbent];
    println!(
        "incumbent: depth {} leaf {} trees {} (val MSE {:.4})",
        incumbent.max_depth, incumbent.min_samples_leaf, incumbent.n_trees, incumbent.val_mse
    );

    // which features does a depth-limited tree actually split on?
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let tree = fit_tree(&train_x, &train_y, 4, incumbent.min_samples_leaf, &mut rng)?;
    let names = tabular_feature_names(&ds.schema);
    println!("selected features of a depth-4 tree (min split depth):");
    for (feature, depth) in tree.selected_features() {
        println!("  {:20} depth {}", names[feature], depth);
    }
    Ok(())
}
