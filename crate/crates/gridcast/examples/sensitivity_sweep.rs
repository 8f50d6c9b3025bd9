//! Time-granularity sensitivity: re-bin, re-train, and re-evaluate the
//! CNN and the Medic baseline per interval length.
//!
//! Run with `cargo run --example sensitivity_sweep`.

use gridcast::datasets::{synth_generate, SynthConfig};
use gridcast::eval::{sensitivity_csv, sensitivity_run, SensitivityConfig};
use gridcast::model::{ModelKind, ModelSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> gridcast::Result<()> {
    let config = SynthConfig {
        q: 3,
        p: 2,
        periods: 12 * 28, // four weeks of 2-hour periods
        granularity_hours: 2,
        emit_records: true,
        decoy_features: 0,
        ..Default::default()
    };
    let out = synth_generate(&config, &mut ChaCha8Rng::seed_from_u64(6))?;
    println!("generated {} incident records", out.records.len());

    let end = out.timeline.period_start(config.periods);
    let rows = sensitivity_run(
        &out.records,
        &out.grid,
        (out.timeline.start, end),
        &out.externals,
        &SensitivityConfig {
            granularities: vec![2, 4, 8, 12, 24],
            look_back: 4,
            max_epochs: 15,
            patience: 5,
            seed: 6,
            ..Default::default()
        },
        &|schema| {
            let mut spec = ModelSpec::default_for(ModelKind::Cnn, schema);
            spec.conv_layers = 1;
            spec.conv_filters = 3;
            spec
        },
    )?;
    print!("{}", sensitivity_csv(&rows));
    Ok(())
}
