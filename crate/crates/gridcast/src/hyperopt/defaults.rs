//! Default search spaces and hierarchical partitions.
//!
//! Levels follow the tuning protocol: binary feature flags are optimized
//! first (when feature selection is on), then the main architecture
//! decisions, then activation functions, then regularization and training
//! parameters.

use super::run::{Partition, PartitionSet, SurrogateKind};
use super::space::{Dimension, SearchSpace};
use crate::datasets::{FeatureKind, FeatureSchema};
use crate::Result;

/// Flat tuning: random-search initialization budget.
pub const DEFAULT_RANDOM_INIT: usize = 500;
/// Flat tuning: BO iterations after initialization.
pub const DEFAULT_BO_ITERATIONS: usize = 1000;
/// Hierarchical tuning: random-search iterations per set.
pub const DEFAULT_SET_RANDOM: usize = 25;
/// Hierarchical tuning: total iterations per set (random + BO).
pub const DEFAULT_SET_TOTAL: usize = 250;

const ACTIVATIONS: [&str; 4] = ["relu", "sigmoid", "tanh", "elu"];
const OPTIMIZERS: [&str; 3] = ["sgd", "momentum", "adam"];

fn feature_flag_dims(schema: &FeatureSchema) -> Vec<Dimension> {
    schema
        .features
        .iter()
        .filter(|f| f.kind != FeatureKind::Demand3d)
        .map(|f| Dimension::binary_feature(&f.name))
        .collect()
}

fn training_dims() -> Vec<Dimension> {
    vec![
        Dimension::categorical("optimizer", &OPTIMIZERS),
        Dimension::log_real("learning_rate", 1e-4, 1e-1),
        Dimension::integer("batch_size", 8, 64),
        Dimension::log_real("l2", 1e-8, 1e-2),
        Dimension::real("dropout", 0.0, 0.5),
    ]
}

fn partition_from(
    groups: Vec<(&str, Vec<String>, SurrogateKind)>,
) -> Partition {
    Partition {
        sets: groups
            .into_iter()
            .filter(|(_, dims, _)| !dims.is_empty())
            .map(|(name, dims, surrogate)| PartitionSet {
                name: name.into(),
                dims,
                random_budget: DEFAULT_SET_RANDOM,
                bo_budget: DEFAULT_SET_TOTAL - DEFAULT_SET_RANDOM,
                surrogate,
            })
            .collect(),
    }
}

/// Search space and hierarchical partition for the heatmap CNN.
///
/// With feature selection, one binary flag per non-demand feature forms
/// the first level of the partition.
pub fn default_space(
    schema: &FeatureSchema,
    with_feature_selection: bool,
) -> Result<(SearchSpace, Partition)> {
    let mut dims = Vec::new();
    let flags = if with_feature_selection {
        feature_flag_dims(schema)
    } else {
        vec![]
    };
    dims.extend(flags.clone());

    let architecture = vec![
        Dimension::integer("conv_layers", 1, 3),
        Dimension::integer("conv_filters", 2, 8),
        Dimension::integer("conv_kernel_space", 1, 3),
        Dimension::integer("conv_kernel_time", 1, 3),
        Dimension::integer("upsample_filters", 1, 4),
        Dimension::integer("fusion_filters", 1, 4),
        Dimension::integer("local_filters", 1, 2),
        Dimension::integer("local_kernel", 1, 3),
        Dimension::integer("dense_width", 8, 64),
    ];
    dims.extend(architecture.clone());

    let activations = vec![
        Dimension::categorical("act_conv", &ACTIVATIONS),
        Dimension::categorical("act_local", &ACTIVATIONS),
        Dimension::categorical("act_dense", &ACTIVATIONS),
    ];
    dims.extend(activations.clone());
    dims.extend(training_dims());

    let space = SearchSpace::new(dims)?;
    let names = |ds: &[Dimension]| ds.iter().map(|d| d.name.clone()).collect::<Vec<_>>();
    let partition = partition_from(vec![
        ("features", names(&flags), SurrogateKind::RandomForest),
        ("architecture", names(&architecture), SurrogateKind::Gp),
        ("activations", names(&activations), SurrogateKind::Gp),
        ("training", names(&training_dims()), SurrogateKind::Gp),
    ]);
    Ok((space, partition))
}

/// Search space and partition for the per-subregion MLP benchmark.
pub fn default_space_mlp(
    schema: &FeatureSchema,
    with_feature_selection: bool,
) -> Result<(SearchSpace, Partition)> {
    let mut dims = Vec::new();
    let flags = if with_feature_selection {
        feature_flag_dims(schema)
    } else {
        vec![]
    };
    dims.extend(flags.clone());
    let architecture = vec![
        Dimension::integer("hidden_layers", 1, 3),
        Dimension::integer("hidden_width", 8, 128),
    ];
    dims.extend(architecture.clone());
    let activations = vec![Dimension::categorical("act_hidden", &ACTIVATIONS)];
    dims.extend(activations.clone());
    dims.extend(training_dims());

    let space = SearchSpace::new(dims)?;
    let names = |ds: &[Dimension]| ds.iter().map(|d| d.name.clone()).collect::<Vec<_>>();
    let partition = partition_from(vec![
        ("features", names(&flags), SurrogateKind::RandomForest),
        ("architecture", names(&architecture), SurrogateKind::Gp),
        ("activations", names(&activations), SurrogateKind::Gp),
        ("training", names(&training_dims()), SurrogateKind::Gp),
    ]);
    Ok((space, partition))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::FeatureDescriptor;
    use crate::hyperopt::validate_partition;

    fn schema_with_features(n_external: usize) -> FeatureSchema {
        let mut features = vec![FeatureDescriptor {
            name: "demand".into(),
            kind: FeatureKind::Demand3d,
            len: 2 * 2 * 3,
            upsample: false,
            source: vec![],
        }];
        for i in 0..n_external {
            features.push(FeatureDescriptor {
                name: format!("ext_{i}"),
                kind: FeatureKind::Scalar,
                len: 1,
                upsample: false,
                source: vec![],
            });
        }
        FeatureSchema {
            q: 2,
            p: 2,
            look_back: 3,
            granularity_hours: 8,
            features,
        }
    }

    #[test]
    fn feature_selection_adds_one_flag_per_feature() {
        let schema = schema_with_features(5);
        let (with_fs, _) = default_space(&schema, true).unwrap();
        let (without_fs, _) = default_space(&schema, false).unwrap();
        assert_eq!(with_fs.len() - without_fs.len(), 5);
        let flag_count = with_fs
            .dims()
            .iter()
            .filter(|d| d.name.starts_with("feat:"))
            .count();
        assert_eq!(flag_count, 5);
    }

    #[test]
    fn partition_is_valid_and_features_come_first() {
        let schema = schema_with_features(3);
        for fs in [true, false] {
            let (space, partition) = default_space(&schema, fs).unwrap();
            validate_partition(&partition, &space).unwrap();
            if fs {
                assert_eq!(partition.sets[0].name, "features");
                assert!(partition.sets[0].dims.iter().all(|d| d.starts_with("feat:")));
            } else {
                assert_eq!(partition.sets[0].name, "architecture");
            }
        }
        let (space, partition) = default_space_mlp(&schema, true).unwrap();
        validate_partition(&partition, &space).unwrap();
    }

    #[test]
    fn default_budgets_follow_protocol() {
        assert_eq!(DEFAULT_RANDOM_INIT, 500);
        assert_eq!(DEFAULT_BO_ITERATIONS, 1000);
        let schema = schema_with_features(2);
        let (_, partition) = default_space(&schema, true).unwrap();
        for set in &partition.sets {
            assert_eq!(set.random_budget, 25);
            assert_eq!(set.random_budget + set.bo_budget, 250);
        }
    }
}
