//! End-to-end pipeline on synthetic data: generate, window, scale, train
//! the heatmap CNN, and compare against the Medic baseline.
//!
//! Run with `cargo run --example synthetic_pipeline` (about a minute in a
//! debug build).

use gridcast::datasets::{build_dataset, synth_generate, Hotspot, SplitFractions, SynthConfig};
use gridcast::eval::{
    compare_models, evaluate_predictions, medic_test_predictions, test_fingerprint,
    test_predictions,
};
use gridcast::model::{build_model, train, ModelKind, ModelSpec, OptimizerKind, TrainOptions};
use gridcast::tensor::Activation;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> gridcast::Result<()> {
    let config = SynthConfig {
        q: 5,
        p: 4,
        periods: 21 * 26,
        base_rate: 2.0,
        weekly_amplitude: 0.5,
        diurnal_amplitude: 0.4,
        hotspots: vec![
            Hotspot {
                row: 1.2,
                col: 1.0,
                sigma: 0.9,
                amplitude: 2.5,
                drift_row: 0.002,
                drift_col: 0.0015,
            },
            Hotspot {
                row: 3.6,
                col: 2.8,
                sigma: 1.3,
                amplitude: 1.5,
                drift_row: -0.0015,
                drift_col: 0.001,
            },
        ],
        driver_effects: vec![("temperature".into(), 0.5)],
        decoy_features: 1,
        ..Default::default()
    };
    let out = synth_generate(&config, &mut ChaCha8Rng::seed_from_u64(4))?;
    println!("generated {} periods over a {}x{} grid", config.periods, config.q, config.p);

    let (ds, prune) = build_dataset(
        &out.cube,
        &out.timeline,
        &out.grid,
        &out.externals,
        6,
        SplitFractions::default(),
        Some(0.8),
    )?;
    println!(
        "dataset: {} instances, {} features{}",
        ds.len(),
        ds.schema.features.len(),
        prune
            .map(|p| format!(", pruned {:?}", p.dropped))
            .unwrap_or_default()
    );

    let mut spec = ModelSpec::default_for(ModelKind::Cnn, &ds.schema);
    spec.conv_layers = 1;
    spec.conv_filters = 6;
    spec.conv_kernel = (3, 3, 3);
    spec.dense_widths = vec![80, 40];
    spec.act_conv = Activation::Elu;
    spec.act_local = Activation::Elu;
    spec.act_dense = Activation::Elu;
    spec.learning_rate = 7.5e-3;
    spec.optimizer = OptimizerKind::Adam;
    spec.batch_size = 8;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let model = build_model(&spec, &ds.schema, &mut rng)?;
    println!("CNN with {} learned parameters", model.count_params());

    let trained = train(
        model,
        &ds,
        &TrainOptions {
            max_epochs: 400,
            patience: 60,
            seed: 5,
            ..Default::default()
        },
    )?;
    println!(
        "trained for {} epochs; best validation loss {:.5}",
        trained.history.len(),
        trained.history.iter().map(|e| e.val_loss).fold(f64::INFINITY, f64::min)
    );

    let fp = test_fingerprint(&ds);
    let y_range = ds.target_range();
    let (preds, actuals) = test_predictions(&trained, &ds)?;
    let cnn = evaluate_predictions("cnn", 8, &preds, &actuals, y_range, &fp)?;
    let (mp, ma) = medic_test_predictions(&out.cube, &ds, 4)?;
    let medic = evaluate_predictions("medic", 8, &mp, &ma, y_range, &fp)?;

    println!("test MSE: cnn {:.4} vs medic {:.4}", cnn.mse, medic.mse);
    println!("test NRMSE: cnn {:.4} vs medic {:.4}", cnn.nrmse, medic.nrmse);
    let table = compare_models(&[cnn, medic])?;
    for row in &table.rows {
        println!(
            "  {:6} mse={:.4} margin of best vs this: {:.2}%",
            row.model_id, row.mse, row.margin_vs_best_pct
        );
    }
    Ok(())
}
