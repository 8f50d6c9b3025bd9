//! Look-back windowing and end-to-end dataset assembly.

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::grid::{GridSpec, Timeline};
use super::ingest::ExternalData;
use super::prune::correlation_prune;
use super::scale::{apply_scaler, fit_scaler};
use super::split::{chronological_split, SplitFractions};
use super::timefeat::one_hot_time;
use super::{
    DemandDataset, FeatureDescriptor, FeatureKind, FeatureSchema, FeatureValue, Instance,
};
use crate::tensor::Tensor;
use crate::{Error, Result};

/// Builds one instance per period `t in [L, T)`: the demand window covers
/// periods `t-L .. t-1`, the target is period `t`. External features are
/// aligned so that predicted-period information enters as scalars or maps
/// and historic series run over the window.
pub fn window_instances(
    cube: &Tensor,
    timeline: &Timeline,
    grid: &GridSpec,
    externals: &ExternalData,
    look_back: usize,
) -> Result<DemandDataset> {
    if cube.rank() != 3 {
        return Err(Error::Shape(format!(
            "demand cube must be q x p x T, got {:?}",
            cube.shape()
        )));
    }
    if look_back == 0 {
        return Err(Error::Argument("look back must be >= 1".into()));
    }
    let (q, p, periods) = (cube.shape()[0], cube.shape()[1], cube.shape()[2]);
    if periods <= look_back {
        return Err(Error::InsufficientHistory(format!(
            "{periods} periods cannot support a look back of {look_back}"
        )));
    }
    if q != grid.q || p != grid.p {
        return Err(Error::Shape(format!(
            "cube {q}x{p} does not match grid {}x{}",
            grid.q, grid.p
        )));
    }

    let g = timeline.granularity_hours;
    let weather_columns: Vec<String> = externals
        .weather
        .as_ref()
        .map(|w| w.columns.clone())
        .unwrap_or_default();
    let holiday_kinds = externals.holiday_kinds();

    let mut features = vec![FeatureDescriptor {
        name: "demand".into(),
        kind: FeatureKind::Demand3d,
        len: q * p * look_back,
        upsample: false,
        source: vec![],
    }];
    for c in &weather_columns {
        features.push(FeatureDescriptor {
            name: format!("hist_{c}"),
            kind: FeatureKind::Series,
            len: look_back,
            upsample: true,
            source: vec![c.clone()],
        });
        features.push(FeatureDescriptor {
            name: format!("pred_{c}"),
            kind: FeatureKind::Scalar,
            len: 1,
            upsample: false,
            source: vec![c.clone()],
        });
    }
    if !externals.events.is_empty() {
        features.push(FeatureDescriptor {
            name: "events".into(),
            kind: FeatureKind::Map2d,
            len: q * p,
            upsample: false,
            source: vec!["events".into()],
        });
    }
    for kind in &holiday_kinds {
        features.push(FeatureDescriptor {
            name: format!("holiday_{kind}"),
            kind: FeatureKind::Scalar,
            len: 1,
            upsample: false,
            source: vec![kind.clone()],
        });
    }
    features.push(FeatureDescriptor {
        name: "hour_slot".into(),
        kind: FeatureKind::OneHot,
        len: (24 / g) as usize,
        upsample: false,
        source: vec![],
    });
    features.push(FeatureDescriptor {
        name: "weekday".into(),
        kind: FeatureKind::OneHot,
        len: 7,
        upsample: false,
        source: vec![],
    });
    features.push(FeatureDescriptor {
        name: "month".into(),
        kind: FeatureKind::OneHot,
        len: 12,
        upsample: false,
        source: vec![],
    });
    let schema = FeatureSchema {
        q,
        p,
        look_back,
        granularity_hours: g,
        features,
    };
    schema.validate()?;

    let mut instances = Vec::with_capacity(periods - look_back);
    let mut targets = Vec::with_capacity(periods - look_back);
    let mut timestamps: Vec<DateTime<Utc>> = Vec::with_capacity(periods - look_back);
    for t in look_back..periods {
        let target_start = timeline.period_start(t);
        let target_date = target_start.date_naive();
        let mut values = Vec::with_capacity(schema.features.len());
        values.push(FeatureValue::Cube {
            tensor: cube.narrow(2, t - look_back, look_back)?,
        });
        if let Some(weather) = &externals.weather {
            for (ci, _) in weather_columns.iter().enumerate() {
                let series: Vec<f64> = (t - look_back..t)
                    .map(|u| weather.value(timeline.period_start(u).date_naive(), ci))
                    .collect::<Result<_>>()?;
                values.push(FeatureValue::Vector { values: series });
                values.push(FeatureValue::Scalar {
                    value: weather.value(target_date, ci)?,
                });
            }
        }
        if !externals.events.is_empty() {
            let mut map = Tensor::zeros(&[q, p]);
            for e in &externals.events {
                if timeline.period_of(e.timestamp) == Some(t) {
                    if let Some((i, j)) = grid.cell_of(e.latitude, e.longitude) {
                        let at = map.offset(&[i, j]);
                        map.data_mut()[at] += e.expected_participants;
                    }
                }
            }
            values.push(FeatureValue::Map { tensor: map });
        }
        for kind in &holiday_kinds {
            values.push(FeatureValue::Scalar {
                value: if externals.is_holiday(target_date, kind) {
                    1.0
                } else {
                    0.0
                },
            });
        }
        let oh = one_hot_time(target_start, g)?;
        values.push(FeatureValue::Vector {
            values: oh.hour_slot,
        });
        values.push(FeatureValue::Vector { values: oh.weekday });
        values.push(FeatureValue::Vector { values: oh.month });

        instances.push(Instance { values });
        targets.push(cube.narrow(2, t, 1)?.squeeze(2)?);
        timestamps.push(target_start);
    }
    Ok(DemandDataset {
        schema,
        instances,
        targets,
        timestamps,
        split: vec![],
        scaler: None,
    })
}

/// Correlation-pruning outcome translated to weather column names.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WeatherPruneReport {
    pub columns: Vec<String>,
    pub kept: Vec<String>,
    /// `(dropped, kept column it exceeded the threshold with)`.
    pub dropped: Vec<(String, String)>,
    pub correlation: Vec<Vec<f64>>,
    pub zero_variance: Vec<String>,
}

/// Full dataset assembly: window, chronological split, correlation pruning
/// of the weather features on the train split, and train-fitted scaling.
pub fn build_dataset(
    cube: &Tensor,
    timeline: &Timeline,
    grid: &GridSpec,
    externals: &ExternalData,
    look_back: usize,
    fractions: SplitFractions,
    prune_threshold: Option<f64>,
) -> Result<(DemandDataset, Option<WeatherPruneReport>)> {
    let mut ds = window_instances(cube, timeline, grid, externals, look_back)?;
    chronological_split(&mut ds, fractions)?;

    let mut prune_report = None;
    if let (Some(threshold), Some(weather)) = (prune_threshold, &externals.weather) {
        let train = ds.indices(super::SplitLabel::Train);
        let columns: Vec<Vec<f64>> = weather
            .columns
            .iter()
            .map(|c| {
                let fi = ds
                    .schema
                    .feature_index(&format!("pred_{c}"))
                    .expect("weather feature present");
                train
                    .iter()
                    .map(|&i| match &ds.instances[i].values[fi] {
                        FeatureValue::Scalar { value } => *value,
                        _ => unreachable!("pred features are scalars"),
                    })
                    .collect()
            })
            .collect();
        let outcome = correlation_prune(&columns, threshold)?;
        let name = |i: usize| weather.columns[i].clone();
        let mut remove = Vec::new();
        for &(dropped, _) in &outcome.dropped {
            let c = &weather.columns[dropped];
            remove.push(ds.schema.feature_index(&format!("hist_{c}")).unwrap());
            remove.push(ds.schema.feature_index(&format!("pred_{c}")).unwrap());
        }
        ds.drop_features(&remove);
        prune_report = Some(WeatherPruneReport {
            columns: weather.columns.clone(),
            kept: outcome.kept.iter().map(|&i| name(i)).collect(),
            dropped: outcome
                .dropped
                .iter()
                .map(|&(d, k)| (name(d), name(k)))
                .collect(),
            correlation: outcome.correlation,
            zero_variance: outcome.zero_variance.iter().map(|&i| name(i)).collect(),
        });
    }

    let scaler = fit_scaler(&ds)?;
    apply_scaler(&mut ds, &scaler)?;
    Ok((ds, prune_report))
}
