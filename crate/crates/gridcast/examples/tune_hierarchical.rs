//! Hierarchical Bayesian optimization: the search dimensions are assigned
//! to disjoint sets and optimized sequentially, each set with the others
//! fixed at the incumbent.
//!
//! Run with `cargo run --example tune_hierarchical`.

use gridcast::hyperopt::{
    hierarchical_bo_run, validate_partition, BoOptions, Dimension, Partition, PartitionSet,
    SearchSpace, SurrogateKind, Theta,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> gridcast::Result<()> {
    let space = SearchSpace::new(vec![
        Dimension::real("x", 0.0, 4.0),
        Dimension::real("y", 0.0, 4.0),
    ])?;
    let set = |name: &str, dims: &[&str]| PartitionSet {
        name: name.into(),
        dims: dims.iter().map(|d| d.to_string()).collect(),
        random_budget: 10,
        bo_budget: 15,
        surrogate: SurrogateKind::Gp,
    };

    // a malformed partition is rejected with the offending names
    let malformed = Partition {
        sets: vec![set("first", &["x"]), set("second", &["x", "y"])],
    };
    match validate_partition(&malformed, &space) {
        Err(e) => println!("malformed partition rejected: {e}"),
        Ok(()) => unreachable!(),
    }

    let partition = Partition {
        sets: vec![set("first", &["x"]), set("second", &["y"])],
    };
    validate_partition(&partition, &space)?;

    // separable objective: per-set optima are the global optimum
    let mut f = |t: &Theta| Ok((t[0].as_f64() - 1.0).powi(2) + (t[1].as_f64() - 2.0).powi(2));
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let run = hierarchical_bo_run(&mut f, &space, &partition, 3, &mut rng, &BoOptions::default())?;
    let best = run.incumbent_trial();
    println!(
        "optimized (x-1)^2 + (y-2)^2 in {} evaluations: f = {:.2e} at ({:.3}, {:.3})",
        run.trials.len(),
        best.value,
        best.theta[0].as_f64(),
        best.theta[1].as_f64()
    );
    for level in 0..2 {
        let evals = run
            .trials
            .iter()
            .filter(|t| t.provenance == gridcast::hyperopt::Provenance::Hier(level))
            .count();
        println!("  level {level}: {evals} evaluations");
    }
    Ok(())
}
