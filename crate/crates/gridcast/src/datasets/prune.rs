//! Correlation-based feature pruning.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Result of a pruning pass over feature columns.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PruneOutcome {
    /// Column indices kept, in input order.
    pub kept: Vec<usize>,
    /// `(dropped column, kept column it correlated with)`.
    pub dropped: Vec<(usize, usize)>,
    /// Full Pearson correlation matrix.
    pub correlation: Vec<Vec<f64>>,
    /// Columns with zero variance; their correlations are defined as 0.
    pub zero_variance: Vec<usize>,
}

/// Greedy scan in column order: a column is dropped when its absolute
/// Pearson correlation with an already-kept column exceeds `threshold`,
/// so exactly one representative of each correlated clique survives.
pub fn correlation_prune(columns: &[Vec<f64>], threshold: f64) -> Result<PruneOutcome> {
    let k = columns.len();
    if k == 0 {
        return Ok(PruneOutcome {
            kept: vec![],
            dropped: vec![],
            correlation: vec![],
            zero_variance: vec![],
        });
    }
    let n = columns[0].len();
    if n < 2 {
        return Err(Error::Argument(
            "correlation needs >= 2 samples per feature".into(),
        ));
    }
    if columns.iter().any(|c| c.len() != n) {
        return Err(Error::Argument("feature columns have unequal lengths".into()));
    }

    let mut means = vec![0.0; k];
    let mut stds = vec![0.0; k];
    let mut zero_variance = Vec::new();
    for (i, col) in columns.iter().enumerate() {
        let m = col.iter().sum::<f64>() / n as f64;
        let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n as f64;
        means[i] = m;
        stds[i] = var.sqrt();
        if stds[i] <= 1e-15 {
            zero_variance.push(i);
        }
    }

    let mut correlation = vec![vec![0.0; k]; k];
    for i in 0..k {
        correlation[i][i] = if stds[i] > 1e-15 { 1.0 } else { 0.0 };
        for j in 0..i {
            let rho = if stds[i] <= 1e-15 || stds[j] <= 1e-15 {
                0.0
            } else {
                let cov = columns[i]
                    .iter()
                    .zip(&columns[j])
                    .map(|(a, b)| (a - means[i]) * (b - means[j]))
                    .sum::<f64>()
                    / n as f64;
                cov / (stds[i] * stds[j])
            };
            correlation[i][j] = rho;
            correlation[j][i] = rho;
        }
    }

    let mut kept: Vec<usize> = Vec::new();
    let mut dropped = Vec::new();
    for i in 0..k {
        match kept
            .iter()
            .find(|&&j| correlation[i][j].abs() > threshold)
        {
            Some(&j) => dropped.push((i, j)),
            None => kept.push(i),
        }
    }
    Ok(PruneOutcome {
        kept,
        dropped,
        correlation,
        zero_variance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identical_columns_drop_the_second() {
        let a = vec![1.0, 2.0, 3.0, 4.0];
        let out = correlation_prune(&[a.clone(), a], 0.8).unwrap();
        assert_eq!(out.kept, vec![0]);
        assert_eq!(out.dropped, vec![(1, 0)]);
        assert!((out.correlation[0][1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn correlation_below_threshold_keeps_both() {
        // rho(a, b) = 0.79 by construction: b = 0.79*a + sqrt(1-0.79^2)*w
        // on standardized orthonormal columns.
        let n = 8;
        let a: Vec<f64> = vec![1.0, 1.0, 1.0, 1.0, -1.0, -1.0, -1.0, -1.0];
        let w: Vec<f64> = vec![1.0, -1.0, 1.0, -1.0, 1.0, -1.0, 1.0, -1.0];
        let rho = 0.79;
        let b: Vec<f64> = (0..n)
            .map(|i| rho * a[i] + (1.0 - rho * rho).sqrt() * w[i])
            .collect();
        let out = correlation_prune(&[a, b], 0.8).unwrap();
        assert!((out.correlation[0][1] - 0.79).abs() < 1e-12);
        assert_eq!(out.kept, vec![0, 1]);
    }

    #[test]
    fn zero_variance_column_is_flagged_and_kept() {
        let a = vec![1.0, 2.0, 3.0, 4.0];
        let constant = vec![7.0; 4];
        let out = correlation_prune(&[a, constant], 0.8).unwrap();
        assert_eq!(out.zero_variance, vec![1]);
        assert_eq!(out.correlation[0][1], 0.0);
        assert_eq!(out.kept, vec![0, 1]);
    }

    #[test]
    fn weather_shaped_exclusions() {
        // Raw daily weather columns in schema order, with correlations
        // planted so that the greedy scan drops exactly the redundant
        // aggregates: the average wind speed, the average and minimum
        // temperature, the average and minimum humidity, and all three
        // dew-point columns (dew point tracks the maximum temperature).
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        let n = 400;
        let draw = |rng: &mut ChaCha8Rng| -> Vec<f64> {
            (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
        };
        let near = |base: &[f64], rng: &mut ChaCha8Rng| -> Vec<f64> {
            base.iter().map(|v| v + rng.random_range(-0.1..0.1)).collect()
        };
        let temp = draw(&mut rng);
        let wind = draw(&mut rng);
        let humidity = draw(&mut rng);
        let names = [
            "max_temperature",
            "avg_temperature",
            "min_temperature",
            "max_wind",
            "avg_wind",
            "min_wind",
            "max_humidity",
            "avg_humidity",
            "min_humidity",
            "max_dew_point",
            "avg_dew_point",
            "min_dew_point",
            "max_sea_level_pressure",
            "precipitation",
        ];
        let columns = vec![
            temp.clone(),              // max_temperature (kept)
            near(&temp, &mut rng),     // avg_temperature (dropped vs max temp)
            near(&temp, &mut rng),     // min_temperature (dropped vs max temp)
            wind.clone(),              // max_wind (kept)
            near(&wind, &mut rng),     // avg_wind (dropped vs max wind)
            draw(&mut rng),            // min_wind (independent, kept)
            humidity.clone(),          // max_humidity (kept)
            near(&humidity, &mut rng), // avg_humidity (dropped)
            near(&humidity, &mut rng), // min_humidity (dropped)
            near(&temp, &mut rng),     // max_dew_point (dropped vs max temp)
            near(&temp, &mut rng),     // avg_dew_point (dropped)
            near(&temp, &mut rng),     // min_dew_point (dropped)
            draw(&mut rng),            // sea level pressure (kept)
            draw(&mut rng),            // precipitation (kept)
        ];
        let out = correlation_prune(&columns, 0.8).unwrap();
        let dropped: Vec<&str> = out.dropped.iter().map(|&(i, _)| names[i]).collect();
        for expected in [
            "avg_wind",
            "avg_temperature",
            "min_temperature",
            "avg_humidity",
            "min_humidity",
            "max_dew_point",
            "avg_dew_point",
            "min_dew_point",
        ] {
            assert!(dropped.contains(&expected), "{expected} not dropped: {dropped:?}");
        }
        let kept: Vec<&str> = out.kept.iter().map(|&i| names[i]).collect();
        for expected in [
            "max_temperature",
            "max_wind",
            "min_wind",
            "max_humidity",
            "max_sea_level_pressure",
            "precipitation",
        ] {
            assert!(kept.contains(&expected), "{expected} not kept: {kept:?}");
        }
    }

    #[test]
    fn one_representative_per_clique_survives() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let n = 200;
        let base_a: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let base_b: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let near = |base: &[f64], rng: &mut ChaCha8Rng| -> Vec<f64> {
            base.iter()
                .map(|v| v + rng.random_range(-0.05..0.05))
                .collect()
        };
        // clique A: columns 0,1,2; clique B: columns 3,4
        let cols = vec![
            base_a.clone(),
            near(&base_a, &mut rng),
            near(&base_a, &mut rng),
            base_b.clone(),
            near(&base_b, &mut rng),
        ];
        let out = correlation_prune(&cols, 0.8).unwrap();
        assert_eq!(out.kept, vec![0, 3]);
        assert_eq!(out.dropped.len(), 3);
    }
}
