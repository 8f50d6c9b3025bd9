//! The Medic industry baseline: per-cell average demand of the same
//! weekday and time slot over the past four weeks of the current and the
//! preceding year.
//!
//! Run with `cargo run --example medic_baseline`.

use gridcast::datasets::{medic_forecast, synth_generate, SynthConfig};
use gridcast::tensor::Tensor;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> gridcast::Result<()> {
    // hand-built single-cell cube: eight planted references average to 2.25
    let per_week = 21; // 8-hour periods
    let t = 56 * per_week;
    let mut values = vec![0.0; t + 1];
    let refs = [2.0, 4.0, 3.0, 1.0, 2.0, 0.0, 4.0, 2.0];
    let mut slot = 0;
    for k in 1..=4usize {
        values[t - k * per_week] = refs[slot];
        slot += 1;
        values[t - (52 + k) * per_week] = refs[slot];
        slot += 1;
    }
    let cube = Tensor::new(vec![1, 1, values.len()], values)?;
    let forecast = medic_forecast(&cube, t, 8, 4)?;
    println!("hand-built references {refs:?} -> forecast {}", forecast.at(&[0, 0]));

    // on weekly-seasonal synthetic demand the baseline beats a global mean
    let config = SynthConfig {
        q: 2,
        p: 2,
        periods: 21 * 30,
        weekly_amplitude: 0.9,
        diurnal_amplitude: 0.0,
        hotspots: vec![],
        driver_effects: vec![],
        decoy_features: 0,
        base_rate: 6.0,
        ..Default::default()
    };
    let out = synth_generate(&config, &mut ChaCha8Rng::seed_from_u64(2))?;
    let periods = out.cube.shape()[2];
    let global_mean = out.cube.sum() / out.cube.len() as f64;
    let mut medic_se = 0.0;
    let mut mean_se = 0.0;
    let mut n = 0.0;
    for t in (periods - 8 * 21)..periods {
        let m = medic_forecast(&out.cube, t, 8, 4)?;
        for i in 0..2 {
            for j in 0..2 {
                let actual = out.cube.at(&[i, j, t]);
                medic_se += (m.at(&[i, j]) - actual).powi(2);
                mean_se += (global_mean - actual).powi(2);
                n += 1.0;
            }
        }
    }
    println!(
        "weekly-seasonal demand, last 8 weeks: medic MSE {:.3} vs global-mean MSE {:.3}",
        medic_se / n,
        mean_se / n
    );
    Ok(())
}
