//! The Medic baseline: average demand of same-weekday, same-slot periods.

use crate::tensor::Tensor;
use crate::{Error, Result};

/// One year in weeks, chosen so the weekday alignment is preserved.
const WEEKS_PER_YEAR: usize = 52;

/// Per-cell mean demand over the reference periods of `t`: the same
/// weekday and time slot of the preceding `weeks` weeks of the current
/// year and of the same weeks one year earlier (up to `2 * weeks`
/// references with two years of history).
///
/// References before the start of the cube are skipped and the divisor
/// reduced; no reference at all is an insufficient-history error.
pub fn medic_forecast(
    cube: &Tensor,
    t: usize,
    granularity_hours: u32,
    weeks: usize,
) -> Result<Tensor> {
    if cube.rank() != 3 {
        return Err(Error::Shape(format!(
            "demand cube must be q x p x T, got {:?}",
            cube.shape()
        )));
    }
    if weeks == 0 {
        return Err(Error::Argument("medic needs weeks >= 1".into()));
    }
    let (q, p, periods) = (cube.shape()[0], cube.shape()[1], cube.shape()[2]);
    if t >= periods {
        return Err(Error::Argument(format!(
            "period {t} outside cube of {periods} periods"
        )));
    }
    let per_week = 7 * (24 / granularity_hours as usize);
    let mut offsets = Vec::with_capacity(2 * weeks);
    for k in 1..=weeks {
        offsets.push(k * per_week);
        offsets.push((WEEKS_PER_YEAR + k) * per_week);
    }
    let references: Vec<usize> = offsets
        .iter()
        .filter(|&&off| t >= off)
        .map(|&off| t - off)
        .collect();
    if references.is_empty() {
        return Err(Error::InsufficientHistory(format!(
            "no reference periods available before period {t}"
        )));
    }
    let mut out = Tensor::zeros(&[q, p]);
    for i in 0..q {
        for j in 0..p {
            let sum: f64 = references.iter().map(|&r| cube.at(&[i, j, r])).sum();
            out.set(&[i, j], sum / references.len() as f64);
        }
    }
    Ok(out)
}
