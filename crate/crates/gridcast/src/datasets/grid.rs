//! Spatial grid definition and incident binning.

use chrono::{DateTime, TimeDelta, Utc};
use serde::{Deserialize, Serialize};

use super::ingest::IncidentRecord;
use crate::tensor::Tensor;
use crate::{Error, Result};

/// The `q x p` subregion grid over a bounding box.
///
/// Cells are half-open on both axes: a point exactly on an interior cell
/// boundary belongs to the higher-index cell, and points on the maximum
/// edge of the box count as outside. Row 0 is the southern edge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub q: usize,
    pub p: usize,
    pub lat_min: f64,
    pub lat_max: f64,
    pub lon_min: f64,
    pub lon_max: f64,
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.q < 1 || self.p < 1 {
            return Err(Error::Argument("grid needs q, p >= 1".into()));
        }
        if !(self.lat_min < self.lat_max) || !(self.lon_min < self.lon_max) {
            return Err(Error::Argument("degenerate grid bounding box".into()));
        }
        Ok(())
    }

    /// Cell of a point, or `None` when outside the box.
    pub fn cell_of(&self, latitude: f64, longitude: f64) -> Option<(usize, usize)> {
        if !latitude.is_finite() || !longitude.is_finite() {
            return None;
        }
        let fi = (latitude - self.lat_min) / (self.lat_max - self.lat_min) * self.q as f64;
        let fj = (longitude - self.lon_min) / (self.lon_max - self.lon_min) * self.p as f64;
        if fi < 0.0 || fj < 0.0 {
            return None;
        }
        let i = fi.floor() as usize;
        let j = fj.floor() as usize;
        if i >= self.q || j >= self.p {
            return None;
        }
        Some((i, j))
    }

    /// Latitude/longitude extent of a cell, half-open.
    pub fn cell_bounds(&self, i: usize, j: usize) -> ((f64, f64), (f64, f64)) {
        let dh = (self.lat_max - self.lat_min) / self.q as f64;
        let dw = (self.lon_max - self.lon_min) / self.p as f64;
        (
            (self.lat_min + i as f64 * dh, self.lat_min + (i + 1) as f64 * dh),
            (self.lon_min + j as f64 * dw, self.lon_min + (j + 1) as f64 * dw),
        )
    }
}

/// Maps period indices to wall-clock intervals of fixed granularity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Timeline {
    pub start: DateTime<Utc>,
    pub granularity_hours: u32,
}

impl Timeline {
    pub fn period_start(&self, t: usize) -> DateTime<Utc> {
        self.start + TimeDelta::hours(t as i64 * self.granularity_hours as i64)
    }

    /// Period containing `ts` if `ts >= start`; half-open intervals.
    pub fn period_of(&self, ts: DateTime<Utc>) -> Option<usize> {
        if ts < self.start {
            return None;
        }
        let secs = (ts - self.start).num_seconds();
        Some((secs / (self.granularity_hours as i64 * 3600)) as usize)
    }

    pub fn periods_per_day(&self) -> usize {
        (24 / self.granularity_hours) as usize
    }

    pub fn periods_per_week(&self) -> usize {
        7 * self.periods_per_day()
    }
}

/// Counters reported by [`bin_incidents`].
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct BinReport {
    pub binned: usize,
    pub dropped_outside_box: usize,
    pub dropped_outside_range: usize,
}

pub const SUPPORTED_GRANULARITIES: [u32; 5] = [2, 4, 8, 12, 24];

/// Counts incidents into a `q x p x T` cube of half-open spatial cells and
/// time intervals. Records outside the box or the time range are dropped
/// and counted in the report.
pub fn bin_incidents(
    records: &[IncidentRecord],
    grid: &GridSpec,
    granularity_hours: u32,
    range: (DateTime<Utc>, DateTime<Utc>),
) -> Result<(Tensor, Timeline, BinReport)> {
    grid.validate()?;
    if !SUPPORTED_GRANULARITIES.contains(&granularity_hours) {
        return Err(Error::Argument(format!(
            "granularity must be one of {SUPPORTED_GRANULARITIES:?} hours, got {granularity_hours}"
        )));
    }
    let (start, end) = range;
    if end <= start {
        return Err(Error::Argument("empty time range".into()));
    }
    let total_hours = (end - start).num_hours();
    let periods = (total_hours / granularity_hours as i64) as usize;
    if periods == 0 {
        return Err(Error::Argument(format!(
            "range of {total_hours} h covers no {granularity_hours}-hour interval"
        )));
    }
    let timeline = Timeline {
        start,
        granularity_hours,
    };
    let mut cube = Tensor::zeros(&[grid.q, grid.p, periods]);
    let mut report = BinReport::default();
    for r in records {
        let Some(t) = timeline.period_of(r.timestamp).filter(|&t| t < periods) else {
            report.dropped_outside_range += 1;
            continue;
        };
        let Some((i, j)) = grid.cell_of(r.latitude, r.longitude) else {
            report.dropped_outside_box += 1;
            continue;
        };
        let at = cube.offset(&[i, j, t]);
        cube.data_mut()[at] += 1.0;
        report.binned += 1;
    }
    Ok((cube, timeline, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    fn grid() -> GridSpec {
        GridSpec {
            q: 4,
            p: 2,
            lat_min: 0.0,
            lat_max: 4.0,
            lon_min: 0.0,
            lon_max: 2.0,
        }
    }

    fn at(h: u32) -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2020, 1, 6, h, 0, 0).unwrap()
    }

    fn record(h: u32, lat: f64, lon: f64) -> IncidentRecord {
        IncidentRecord {
            timestamp: at(h),
            latitude: lat,
            longitude: lon,
            category: "Medic Response".into(),
        }
    }

    #[test]
    fn empty_records_give_zero_cube() {
        let (cube, _, report) =
            bin_incidents(&[], &grid(), 8, (at(0), at(0) + TimeDelta::hours(24))).unwrap();
        assert_eq!(cube.shape(), &[4, 2, 3]);
        assert!(cube.data().iter().all(|&v| v == 0.0));
        assert_eq!(report.binned, 0);
    }

    #[test]
    fn same_cell_same_interval_counts_two() {
        let records = vec![record(1, 0.5, 0.5), record(2, 0.7, 0.3)];
        let (cube, _, report) =
            bin_incidents(&records, &grid(), 8, (at(0), at(0) + TimeDelta::hours(24))).unwrap();
        assert_eq!(cube.at(&[0, 0, 0]), 2.0);
        assert_eq!(cube.sum(), 2.0);
        assert_eq!(report.binned, 2);
    }

    #[test]
    fn interior_boundary_goes_to_higher_cell() {
        // latitude exactly 1.0 is the boundary between rows 0 and 1
        let records = vec![record(1, 1.0, 0.5)];
        let (cube, _, _) =
            bin_incidents(&records, &grid(), 8, (at(0), at(0) + TimeDelta::hours(8))).unwrap();
        assert_eq!(cube.at(&[1, 0, 0]), 1.0);
    }

    #[test]
    fn outside_box_is_dropped_and_counted() {
        // lat_max itself is outside under the half-open convention
        let records = vec![record(1, 4.0, 0.5), record(1, -0.1, 0.5)];
        let (cube, _, report) =
            bin_incidents(&records, &grid(), 8, (at(0), at(0) + TimeDelta::hours(8))).unwrap();
        assert_eq!(cube.sum(), 0.0);
        assert_eq!(report.dropped_outside_box, 2);
    }

    #[test]
    fn cube_total_equals_in_range_count() {
        let mut records = Vec::new();
        for h in 0..24 {
            records.push(record(h, (h % 4) as f64 + 0.5, (h % 2) as f64 + 0.5));
        }
        let (cube, _, report) =
            bin_incidents(&records, &grid(), 8, (at(0), at(0) + TimeDelta::hours(24))).unwrap();
        assert_eq!(cube.sum(), 24.0);
        assert_eq!(report.binned, 24);
    }

    #[test]
    fn unsupported_granularity_rejected() {
        assert!(bin_incidents(&[], &grid(), 5, (at(0), at(8))).is_err());
    }

    #[test]
    fn empty_range_rejected() {
        assert!(bin_incidents(&[], &grid(), 8, (at(8), at(8))).is_err());
    }
}
