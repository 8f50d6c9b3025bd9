//! Synthetic demand generator with a known intensity function.
//!
//! Poisson counts are drawn around a constructed intensity combining a
//! spatial background, drifting Gaussian hot-spots, weekly and diurnal
//! seasonality, and named external drivers. Decoy features are generated
//! independently of the intensity. The emitted ground truth lets tests
//! verify planted structure.

use std::collections::BTreeMap;

use chrono::{DateTime, Datelike, TimeDelta, TimeZone, Utc};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::grid::{GridSpec, Timeline};
use super::ingest::{ExternalData, IncidentRecord, WeatherTable};
use crate::tensor::Tensor;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hotspot {
    pub row: f64,
    pub col: f64,
    pub sigma: f64,
    pub amplitude: f64,
    /// Cells per period; the center wraps around the grid.
    pub drift_row: f64,
    pub drift_col: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthConfig {
    pub q: usize,
    pub p: usize,
    pub periods: usize,
    pub granularity_hours: u32,
    pub start: DateTime<Utc>,
    pub base_rate: f64,
    pub weekly_amplitude: f64,
    pub diurnal_amplitude: f64,
    pub hotspots: Vec<Hotspot>,
    /// Named daily drivers and their multiplicative effect strengths.
    pub driver_effects: Vec<(String, f64)>,
    /// Number of independent decoy columns added to the weather table.
    pub decoy_features: usize,
    /// Also place individual incident records inside cells and periods.
    pub emit_records: bool,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            q: 6,
            p: 4,
            periods: 420, // 20 weeks of 8-hour periods
            granularity_hours: 8,
            start: Utc.with_ymd_and_hms(2020, 1, 6, 0, 0, 0).unwrap(),
            base_rate: 2.0,
            weekly_amplitude: 0.5,
            diurnal_amplitude: 0.4,
            hotspots: vec![Hotspot {
                row: 1.5,
                col: 1.0,
                sigma: 1.0,
                amplitude: 2.0,
                drift_row: 0.05,
                drift_col: 0.03,
            }],
            driver_effects: vec![("temperature".into(), 0.4)],
            decoy_features: 2,
            emit_records: false,
        }
    }
}

/// Echo of the constructed intensity so tests know the ground truth.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthTruth {
    pub base_rate: f64,
    pub weekly_amplitude: f64,
    pub diurnal_amplitude: f64,
    pub hotspots: Vec<Hotspot>,
    pub driver_effects: Vec<(String, f64)>,
    pub decoys: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthOutput {
    pub cube: Tensor,
    pub timeline: Timeline,
    pub grid: GridSpec,
    pub externals: ExternalData,
    pub records: Vec<IncidentRecord>,
    pub truth: SynthTruth,
}

/// Knuth's Poisson sampler; adequate for the small rates used here.
fn poisson(lambda: f64, rng: &mut impl Rng) -> u64 {
    if lambda <= 0.0 {
        return 0;
    }
    let limit = (-lambda).exp();
    let mut k = 0u64;
    let mut prod: f64 = rng.random();
    while prod > limit {
        k += 1;
        prod *= rng.random::<f64>();
    }
    k
}

fn driver_value(index: usize, day: i64) -> f64 {
    // deterministic daily curves with distinct period lengths per driver
    let period = 9.0 + 4.0 * index as f64;
    let phase = index as f64 * 1.3;
    (2.0 * std::f64::consts::PI * day as f64 / period + phase).sin()
}

pub fn synth_generate(config: &SynthConfig, rng: &mut impl Rng) -> Result<SynthOutput> {
    if config.q == 0 || config.p == 0 || config.periods == 0 {
        return Err(Error::Argument("synth needs q, p, periods >= 1".into()));
    }
    if 24 % config.granularity_hours != 0 {
        return Err(Error::Argument("granularity must divide 24".into()));
    }
    let timeline = Timeline {
        start: config.start,
        granularity_hours: config.granularity_hours,
    };
    let grid = GridSpec {
        q: config.q,
        p: config.p,
        lat_min: 0.0,
        lat_max: config.q as f64,
        lon_min: 0.0,
        lon_max: config.p as f64,
    };
    let per_day = timeline.periods_per_day();
    let per_week = timeline.periods_per_week();

    // Daily weather table covering every generated period.
    let first_day = config.start.date_naive();
    let n_days = config.periods.div_ceil(per_day) + 1;
    let mut columns: Vec<String> = config.driver_effects.iter().map(|(n, _)| n.clone()).collect();
    let decoys: Vec<String> = (1..=config.decoy_features)
        .map(|i| format!("decoy_{i}"))
        .collect();
    columns.extend(decoys.iter().cloned());
    let mut rows = BTreeMap::new();
    for d in 0..n_days {
        let date = first_day + TimeDelta::days(d as i64);
        let day_index = date.num_days_from_ce() as i64;
        let mut values: Vec<f64> = (0..config.driver_effects.len())
            .map(|i| driver_value(i, day_index))
            .collect();
        for _ in &decoys {
            values.push(rng.random_range(-1.0..1.0));
        }
        rows.insert(date, values);
    }
    let weather = WeatherTable {
        columns: columns.clone(),
        rows,
    };

    let mut cube = Tensor::zeros(&[config.q, config.p, config.periods]);
    let mut records = Vec::new();
    for t in 0..config.periods {
        let week_phase = (t % per_week) as f64 / per_week as f64;
        let day_phase = (t % per_day) as f64 / per_day as f64;
        let weekly = 1.0 + config.weekly_amplitude * (2.0 * std::f64::consts::PI * week_phase).sin();
        let diurnal =
            1.0 + config.diurnal_amplitude * (2.0 * std::f64::consts::PI * day_phase).sin();
        let date = timeline.period_start(t).date_naive();
        let day_index = date.num_days_from_ce() as i64;
        let mut driver = 1.0;
        for (i, (_, eff)) in config.driver_effects.iter().enumerate() {
            driver *= (1.0 + eff * driver_value(i, day_index)).max(0.05);
        }
        for i in 0..config.q {
            for j in 0..config.p {
                let mut spatial = 0.2;
                for h in &config.hotspots {
                    let cr = (h.row + h.drift_row * t as f64).rem_euclid(config.q as f64);
                    let cc = (h.col + h.drift_col * t as f64).rem_euclid(config.p as f64);
                    let d2 = (i as f64 + 0.5 - cr).powi(2) + (j as f64 + 0.5 - cc).powi(2);
                    spatial += h.amplitude * (-d2 / (2.0 * h.sigma * h.sigma)).exp();
                }
                let lambda = config.base_rate * weekly * diurnal * spatial * driver;
                let count = poisson(lambda.max(0.0), rng);
                cube.set(&[i, j, t], count as f64);
                if config.emit_records {
                    let ((lat_lo, lat_hi), (lon_lo, lon_hi)) = grid.cell_bounds(i, j);
                    let period_start = timeline.period_start(t);
                    for _ in 0..count {
                        let lat = rng.random_range(lat_lo..lat_hi);
                        let lon = rng.random_range(lon_lo..lon_hi);
                        let offset_secs = rng
                            .random_range(0..(config.granularity_hours as i64 * 3600));
                        records.push(IncidentRecord {
                            timestamp: period_start + TimeDelta::seconds(offset_secs),
                            latitude: lat,
                            longitude: lon,
                            category: "Medic Response".into(),
                        });
                    }
                }
            }
        }
    }
    records.sort_by_key(|r| r.timestamp);

    Ok(SynthOutput {
        cube,
        timeline,
        grid,
        externals: ExternalData {
            weather: Some(weather),
            events: vec![],
            holidays: vec![],
        },
        records,
        truth: SynthTruth {
            base_rate: config.base_rate,
            weekly_amplitude: config.weekly_amplitude,
            diurnal_amplitude: config.diurnal_amplitude,
            hotspots: config.hotspots.clone(),
            driver_effects: config.driver_effects.clone(),
            decoys,
        },
    })
}
