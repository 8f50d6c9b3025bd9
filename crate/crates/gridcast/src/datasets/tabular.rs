//! Per-subregion tabular view used by the tree benchmarks: one row per
//! (instance, cell) with the cell's demand history, the shared external
//! features, and the cell coordinates.

use super::{DemandDataset, FeatureKind, FeatureSchema, FeatureValue, Instance, SplitLabel};

pub fn tabular_feature_names(schema: &FeatureSchema) -> Vec<String> {
    let mut names = Vec::new();
    for k in 1..=schema.look_back {
        names.push(format!("demand_lag_{k}"));
    }
    names.push("cell_row".into());
    names.push("cell_col".into());
    for f in &schema.features {
        match f.kind {
            FeatureKind::Demand3d => {}
            FeatureKind::Map2d => names.push(f.name.clone()),
            FeatureKind::Series => {
                for k in 1..=schema.look_back {
                    names.push(format!("{}_lag_{k}", f.name));
                }
            }
            FeatureKind::OneHot => {
                for k in 0..f.len {
                    names.push(format!("{}_{k}", f.name));
                }
            }
            FeatureKind::Scalar => names.push(f.name.clone()),
        }
    }
    names
}

/// Feature row for one cell. Lag 1 is the most recent period.
pub fn tabular_row(schema: &FeatureSchema, instance: &Instance, row: usize, col: usize) -> Vec<f64> {
    let mut out = Vec::new();
    let demand = schema.demand_index();
    match &instance.values[demand] {
        FeatureValue::Cube { tensor } => {
            for k in 1..=schema.look_back {
                out.push(tensor.at(&[row, col, schema.look_back - k]));
            }
        }
        _ => unreachable!("demand feature is a cube"),
    }
    out.push(row as f64);
    out.push(col as f64);
    for (fi, f) in schema.features.iter().enumerate() {
        match (&f.kind, &instance.values[fi]) {
            (FeatureKind::Demand3d, _) => {}
            (FeatureKind::Map2d, FeatureValue::Map { tensor }) => out.push(tensor.at(&[row, col])),
            (FeatureKind::Series, FeatureValue::Vector { values }) => {
                for k in 1..=schema.look_back {
                    out.push(values[schema.look_back - k]);
                }
            }
            (FeatureKind::OneHot, FeatureValue::Vector { values }) => out.extend(values.iter()),
            (FeatureKind::Scalar, FeatureValue::Scalar { value }) => out.push(*value),
            (kind, value) => unreachable!("schema kind {kind:?} with payload {value:?}"),
        }
    }
    out
}

/// Rows and raw scalar targets for every (instance, cell) of a split.
pub fn to_tabular(ds: &DemandDataset, label: SplitLabel) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut x = Vec::new();
    let mut y = Vec::new();
    for &i in &ds.indices(label) {
        for row in 0..ds.schema.q {
            for col in 0..ds.schema.p {
                x.push(tabular_row(&ds.schema, &ds.instances[i], row, col));
                y.push(ds.targets[i].at(&[row, col]));
            }
        }
    }
    (x, y)
}
