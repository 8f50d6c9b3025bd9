//! Intrinsic feature selection: binary hyperparameter flags decide which
//! features (and their network branches) exist. Masked features shrink the
//! parameter count and provably cannot influence predictions.
//!
//! Run with `cargo run --example feature_selection`.

use gridcast::datasets::{build_dataset, synth_generate, SplitFractions, SynthConfig};
use gridcast::hyperopt::{default_space, sample_random, theta_to_json};
use gridcast::model::{build_model, ModelKind, ModelSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> gridcast::Result<()> {
    let config = SynthConfig {
        q: 3,
        p: 3,
        periods: 160,
        driver_effects: vec![("temperature".into(), 0.4), ("pressure".into(), 0.3)],
        decoy_features: 2,
        ..Default::default()
    };
    let out = synth_generate(&config, &mut ChaCha8Rng::seed_from_u64(1))?;
    let (ds, _) = build_dataset(
        &out.cube,
        &out.timeline,
        &out.grid,
        &out.externals,
        4,
        SplitFractions::default(),
        None,
    )?;

    // the search space gains one binary flag per candidate feature
    let (space, partition) = default_space(&ds.schema, true)?;
    let flags = space.dims().iter().filter(|d| d.name.starts_with("feat:")).count();
    println!("{} features -> {flags} binary flag dimensions", ds.schema.features.len());
    println!("partition levels: {:?}", partition.sets.iter().map(|s| s.name.as_str()).collect::<Vec<_>>());

    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let theta = sample_random(&space, &mut rng);
    println!("sampled assignment: {}", theta_to_json(&space, &theta));

    let spec = ModelSpec::from_assignment(ModelKind::Cnn, &ds.schema, &space, &theta)?;
    let masked_model = build_model(&spec, &ds.schema, &mut ChaCha8Rng::seed_from_u64(3))?;
    let mut all_on = spec.clone();
    all_on.feature_mask.clear();
    let full_model = build_model(&all_on, &ds.schema, &mut ChaCha8Rng::seed_from_u64(3))?;
    println!(
        "parameters: all features {} -> masked {} ({:.1}% reduction)",
        full_model.count_params(),
        masked_model.count_params(),
        100.0 * (1.0 - masked_model.count_params() as f64 / full_model.count_params() as f64)
    );

    // perturbing a masked feature cannot change the prediction
    let masked_off: Vec<&String> = spec
        .feature_mask
        .iter()
        .filter(|(_, &on)| !on)
        .map(|(name, _)| name)
        .collect();
    if let Some(name) = masked_off.first() {
        let fi = ds.schema.feature_index(name).unwrap();
        let baseline = masked_model.predict(&ds.instances[0])?;
        let mut perturbed = ds.instances[0].clone();
        perturbed.values[fi] = perturbed.values[fi].map_values(|v| v * 100.0 + 3.0);
        let after = masked_model.predict(&perturbed)?;
        assert_eq!(baseline, after);
        println!("perturbing masked '{name}' leaves the prediction bit-identical");
    }
    Ok(())
}
