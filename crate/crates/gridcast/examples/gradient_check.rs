//! Verifies an analytic backward pass against central finite differences.
//!
//! Run with `cargo run --example gradient_check`.

use gridcast::layers::{Conv3d, Padding};
use gridcast::tensor::{Activation, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> gridcast::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let layer = Conv3d::new(2, 2, (2, 2, 2), (1, 1, 1), Padding::Same, Activation::Tanh)
        .init_glorot(&mut rng);
    let input = Tensor::new(
        vec![2, 3, 3, 3],
        (0..54).map(|_| rng.random_range(-1.0..1.0)).collect(),
    )?;

    // scalar loss: sum of outputs weighted by fixed coefficients
    let out = layer.forward(&input)?;
    let coeffs: Vec<f64> = (0..out.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let loss = |l: &Conv3d| -> f64 {
        l.forward(&input)
            .unwrap()
            .data()
            .iter()
            .zip(&coeffs)
            .map(|(o, c)| o * c)
            .sum()
    };

    let grad_out = Tensor::new(out.shape().to_vec(), coeffs.clone())?;
    let analytic = layer.backward(&input, &grad_out)?;

    let eps = 1e-5;
    let mut worst: f64 = 0.0;
    for i in 0..layer.weights.len() {
        let mut plus = layer.clone();
        plus.weights.data_mut()[i] += eps;
        let mut minus = layer.clone();
        minus.weights.data_mut()[i] -= eps;
        let fd = (loss(&plus) - loss(&minus)) / (2.0 * eps);
        let a = analytic.grad_weights.data()[i];
        worst = worst.max((a - fd).abs() / (a.abs() + fd.abs() + 1e-6));
    }
    println!(
        "checked {} weight gradients, max relative error {worst:.3e}",
        layer.weights.len()
    );
    assert!(worst < 1e-4);
    println!("analytic backward matches finite differences");
    Ok(())
}
