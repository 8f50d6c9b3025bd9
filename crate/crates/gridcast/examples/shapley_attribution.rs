//! Shapley feature attribution: the exact axioms on a linear model, then
//! Monte-Carlo attribution of a trained forecasting model.
//!
//! Run with `cargo run --example shapley_attribution`.

use gridcast::datasets::{build_dataset, synth_generate, FeatureValue, SplitFractions, SynthConfig};
use gridcast::eval::{attribution_report, permutation_shapley, AttributionConfig, AttributionTarget};
use gridcast::model::{build_model, train, ModelKind, ModelSpec, TrainOptions};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> gridcast::Result<()> {
    // exact linear case: f(x) = 2*x1 + 3*x2 against a zero background
    let scalar = |v: f64| FeatureValue::Scalar { value: v };
    let mut linear = |values: &[FeatureValue]| -> gridcast::Result<f64> {
        let v: Vec<f64> = values
            .iter()
            .map(|x| match x {
                FeatureValue::Scalar { value } => *value,
                _ => 0.0,
            })
            .collect();
        Ok(2.0 * v[0] + 3.0 * v[1])
    };
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let exact = permutation_shapley(
        &mut linear,
        &[scalar(1.0), scalar(1.0)],
        &[vec![scalar(0.0), scalar(0.0)]],
        0, // exhaustive permutations
        &mut rng,
    )?;
    println!("linear model phi = {:?} (coefficients recovered exactly)", exact.phi);
    println!(
        "efficiency: sum(phi) = {:.12} = f(x) - base = {:.12}",
        exact.phi.iter().sum::<f64>(),
        exact.prediction - exact.base_value
    );

    // Monte-Carlo attribution of a trained model
    let config = SynthConfig {
        q: 3,
        p: 3,
        periods: 21 * 12,
        driver_effects: vec![("temperature".into(), 0.5)],
        decoy_features: 1,
        ..Default::default()
    };
    let out = synth_generate(&config, &mut ChaCha8Rng::seed_from_u64(2))?;
    let (ds, _) = build_dataset(
        &out.cube,
        &out.timeline,
        &out.grid,
        &out.externals,
        4,
        SplitFractions::default(),
        None,
    )?;
    let mut spec = ModelSpec::default_for(ModelKind::Cnn, &ds.schema);
    spec.dense_widths = vec![48];
    spec.learning_rate = 5e-3;
    spec.batch_size = 8;
    let model = build_model(&spec, &ds.schema, &mut ChaCha8Rng::seed_from_u64(3))?;
    let trained = train(
        model,
        &ds,
        &TrainOptions {
            max_epochs: 60,
            patience: 15,
            seed: 3,
            ..Default::default()
        },
    )?;

    let table = attribution_report(
        &trained,
        &ds,
        &AttributionConfig {
            background_size: 40,
            eval_samples: 10,
            permutations: 24,
            seed: 4,
            target: AttributionTarget::HeatmapTotal,
        },
    )?;
    println!("\nattribution of the heatmap total (base value {:.3}):", table.base_value);
    let mut rows = table.rows.clone();
    rows.sort_by(|a, b| b.mean_abs_phi.partial_cmp(&a.mean_abs_phi).unwrap());
    for row in rows {
        println!("  {:22} mean|phi| = {:8.4}  mean phi = {:8.4}", row.feature, row.mean_abs_phi, row.mean_phi);
    }
    Ok(())
}
