//! Basic Bayesian optimization against random search on a noiseless
//! quadratic, with expected improvement on a Gaussian-process surrogate.
//!
//! Run with `cargo run --example tune_basic_bo`.

use gridcast::hyperopt::{
    bo_run, expected_improvement, BoOptions, Dimension, SearchSpace, SurrogateKind, Theta,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> gridcast::Result<()> {
    println!("EI(mu=0.5, sigma=1, f*=1) = {:.5}", expected_improvement(0.5, 1.0, 1.0));

    let space = SearchSpace::new(vec![
        Dimension::real("x", 0.0, 10.0),
        Dimension::real("y", 0.0, 10.0),
    ])?;
    let objective = |t: &Theta| (t[0].as_f64() - 3.0).powi(2) + (t[1].as_f64() - 7.0).powi(2);

    let options = BoOptions::default();
    for (label, m, n, kind) in [
        ("random search", 40usize, 0usize, SurrogateKind::Gp),
        ("bo-gp        ", 10, 30, SurrogateKind::Gp),
        ("bo-rf        ", 10, 30, SurrogateKind::RandomForest),
        ("bo-et        ", 10, 30, SurrogateKind::ExtraTrees),
    ] {
        let mut f = |t: &Theta| Ok(objective(t));
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let run = bo_run(&mut f, &space, m, n, kind, &mut rng, &options)?;
        let best = run.incumbent_trial();
        println!(
            "{label} 40 evals: best f = {:.5} at ({:.3}, {:.3})",
            best.value,
            best.theta[0].as_f64(),
            best.theta[1].as_f64()
        );
    }
    Ok(())
}
