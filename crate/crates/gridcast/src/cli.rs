//! Batch command-line pipeline: ingest, feature building, tuning,
//! training, prediction, evaluation, the Medic baseline, attribution,
//! sensitivity, benchmarks, and report assembly.
//!
//! Every subcommand is idempotent given identical inputs and seed:
//! artifacts are written atomically (temp file + rename), contain no wall
//!-clock timestamps, and each run emits a `manifest.json` with the config
//! echo, its hash, and the crate version. The global `--seed` expands into
//! per-stage seeds through fixed rng stream ids, so stages reproduce
//! independently.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::datasets::{
    bin_incidents, build_dataset, read_events_csv, read_holidays_csv, read_incidents_csv,
    read_weather_csv, synth_generate, to_tabular, write_incidents_csv, write_weather_csv,
    BinReport, DemandDataset, ExternalData, GridSpec, SplitFractions, SplitLabel,
    SynthConfig, Timeline,
};
use crate::eval::{
    attribution_csv, attribution_report, compare_models, comparison_csv, evaluate_predictions,
    medic_test_predictions, sensitivity_csv, sensitivity_run, svg_line_chart, test_fingerprint,
    test_predictions, AttributionConfig, AttributionTarget, EvaluationReport, SensitivityConfig,
};
use crate::hyperopt::{
    bo_dropout_run, bo_run, default_space, default_space_mlp, hierarchical_bo_run, theta_to_json,
    trace_csv, BoOptions, Partition, SearchSpace, SurrogateKind, Theta, TuneResult,
    DEFAULT_BO_ITERATIONS, DEFAULT_RANDOM_INIT, DEFAULT_SET_RANDOM,
};
use crate::model::{
    build_model, load_model, save_model, train, ModelKind, ModelSpec, TrainOptions,
};
use crate::tensor::Tensor;
use crate::trees::{grid_search_trees, fit_tree, TabularSplit, TreeGrid};
use crate::{Error, Result};

/// Stream ids expanding the global seed into per-stage seeds.
pub mod stage {
    pub const SYNTH: u64 = 1;
    pub const TUNE: u64 = 2;
    pub const TRAIN: u64 = 3;
    pub const SHAP: u64 = 4;
    pub const SENSITIVITY: u64 = 5;
    pub const TREES: u64 = 6;
}

/// Seeded rng for one pipeline stage.
pub fn stage_rng(seed: u64, stage_id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stage_id);
    rng
}

/// Common pipeline configuration shared by the ingest-like subcommands.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub incidents: Option<PathBuf>,
    pub weather: Option<PathBuf>,
    pub events: Option<PathBuf>,
    pub holidays: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub grid: GridSpec,
    pub granularity_hours: u32,
    pub look_back: usize,
    pub fractions: SplitFractions,
    pub seed: u64,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, path) in [
            ("incidents", &self.incidents),
            ("weather", &self.weather),
            ("events", &self.events),
            ("holidays", &self.holidays),
        ] {
            if let Some(p) = path {
                if !p.exists() {
                    return Err(Error::Config(format!(
                        "{name} file {} does not exist",
                        p.display()
                    )));
                }
            }
        }
        if self.look_back < 1 {
            return Err(Error::Config("look back must be >= 1".into()));
        }
        self.grid.validate()?;
        self.fractions.validate()?;
        std::fs::create_dir_all(&self.out_dir)?;
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Argument surface
// ---------------------------------------------------------------------------

#[derive(Parser, Debug)]
#[command(
    name = "gridcast",
    about = "Spatio-temporal demand forecasting: ingest, tune, train, evaluate, attribute",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct CommonOut {
    /// Output directory for artifacts and the run manifest.
    #[arg(long)]
    pub out: PathBuf,
    /// Global seed; stages derive their own streams from it.
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Bin incident records into a demand cube and cache raw externals.
    Ingest {
        #[command(flatten)]
        out: CommonOut,
        #[arg(long)]
        incidents: PathBuf,
        #[arg(long)]
        weather: Option<PathBuf>,
        #[arg(long)]
        events: Option<PathBuf>,
        #[arg(long)]
        holidays: Option<PathBuf>,
        /// Grid as q,p,lat_min,lat_max,lon_min,lon_max.
        #[arg(long)]
        grid: String,
        #[arg(long, default_value_t = 8)]
        granularity: u32,
        /// RFC 3339 range start (inclusive).
        #[arg(long)]
        start: String,
        /// RFC 3339 range end (exclusive).
        #[arg(long)]
        end: String,
        /// Keep only records of this category; empty keeps everything.
        #[arg(long, default_value = "Medic Response")]
        category: String,
    },
    /// Window a cached cube into model instances: split, prune, scale.
    Features {
        #[command(flatten)]
        out: CommonOut,
        /// `ingest.json` produced by the ingest or synth subcommand.
        #[arg(long)]
        ingest: PathBuf,
        #[arg(long, default_value_t = 6)]
        look_back: usize,
        #[arg(long, default_value_t = 0.8)]
        prune_threshold: f64,
        /// Disable correlation pruning.
        #[arg(long, default_value_t = false)]
        no_prune: bool,
        #[arg(long, default_value_t = 0.6)]
        train_fraction: f64,
        #[arg(long, default_value_t = 0.2)]
        val_fraction: f64,
        #[arg(long, default_value_t = 0.2)]
        test_fraction: f64,
    },
    /// Generate synthetic demand with known ground truth.
    Synth {
        #[command(flatten)]
        out: CommonOut,
        /// JSON file with a full synthetic config; flags below override.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        periods: Option<usize>,
        #[arg(long)]
        granularity: Option<u32>,
        /// Grid as q,p (unit bounding box).
        #[arg(long)]
        grid: Option<String>,
        /// Also emit individual incident records.
        #[arg(long, default_value_t = false)]
        emit_records: bool,
    },
    /// Hyperparameter tuning with random search or Bayesian optimization.
    Tune {
        #[command(flatten)]
        out: CommonOut,
        /// `ds.bin` produced by the features subcommand.
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_parser = ["cnn", "mlp"], default_value = "cnn")]
        model: String,
        #[arg(long, value_parser = ["random", "bo-gp", "bo-rf", "bo-et", "bo-dropout", "bo-hier"], default_value = "bo-gp")]
        strategy: String,
        /// Random-search initialization budget.
        #[arg(long, default_value_t = DEFAULT_RANDOM_INIT)]
        budget_init: usize,
        /// Optimization budget after initialization.
        #[arg(long, default_value_t = DEFAULT_BO_ITERATIONS)]
        budget: usize,
        #[arg(long, default_value_t = 0.3)]
        dropout_dtilde: f64,
        #[arg(long, default_value_t = 0.1)]
        dropout_p: f64,
        /// Add one binary flag per feature and tune them first.
        #[arg(long, default_value_t = false)]
        feature_selection: bool,
        /// Search-space JSON overriding the default space.
        #[arg(long)]
        space: Option<PathBuf>,
        /// Partition JSON overriding the default hierarchical sets.
        #[arg(long)]
        partition: Option<PathBuf>,
        /// Training epochs per objective evaluation.
        #[arg(long, default_value_t = 40)]
        train_epochs: usize,
        #[arg(long, default_value_t = 8)]
        train_patience: usize,
        /// Candidate draws per acquisition optimization.
        #[arg(long, default_value_t = 1000)]
        candidates: usize,
    },
    /// Train a model spec on a dataset.
    Train {
        #[command(flatten)]
        out: CommonOut,
        #[arg(long)]
        data: PathBuf,
        /// `spec.json` (for example from tune); exclusive with --default.
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Use the baseline spec of this kind instead of a spec file.
        #[arg(long, value_parser = ["cnn", "mlp"])]
        default: Option<String>,
        #[arg(long, default_value_t = 300)]
        max_epochs: usize,
        #[arg(long, default_value_t = 20)]
        patience: usize,
    },
    /// Predict heatmaps for a dataset split.
    Predict {
        #[command(flatten)]
        out: CommonOut,
        /// Model directory holding model.json and weights.bin.
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_parser = ["train", "val", "test", "all"], default_value = "test")]
        split: String,
    },
    /// Evaluate a trained model on the test split.
    Evaluate {
        #[command(flatten)]
        out: CommonOut,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Model id recorded in the report and file name.
        #[arg(long, default_value = "cnn")]
        id: String,
    },
    /// Evaluate the Medic baseline on the test split.
    Medic {
        #[command(flatten)]
        out: CommonOut,
        /// `ingest.json` with the demand cube.
        #[arg(long)]
        ingest: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 4)]
        weeks: usize,
    },
    /// Shapley feature attribution for a trained model.
    Shap {
        #[command(flatten)]
        out: CommonOut,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 300)]
        background: usize,
        #[arg(long, default_value_t = 50)]
        samples: usize,
        #[arg(long, default_value_t = 64)]
        permutations: usize,
        /// Attribute one subregion instead of the heatmap total: "row,col".
        #[arg(long)]
        cell: Option<String>,
    },
    /// Granularity sensitivity: re-run the pipeline per time interval.
    Sensitivity {
        #[command(flatten)]
        out: CommonOut,
        #[arg(long)]
        incidents: PathBuf,
        #[arg(long)]
        weather: Option<PathBuf>,
        #[arg(long)]
        events: Option<PathBuf>,
        #[arg(long)]
        holidays: Option<PathBuf>,
        #[arg(long)]
        grid: String,
        #[arg(long)]
        start: String,
        #[arg(long)]
        end: String,
        #[arg(long, value_delimiter = ',', default_values_t = vec![2u32, 4, 8, 12, 24])]
        granularities: Vec<u32>,
        #[arg(long, default_value_t = 6)]
        look_back: usize,
        #[arg(long, default_value_t = 60)]
        max_epochs: usize,
        #[arg(long, default_value_t = 10)]
        patience: usize,
        #[arg(long, default_value = "Medic Response")]
        category: String,
    },
    /// Tree benchmarks (grid search, selected features).
    Benchmark {
        #[command(subcommand)]
        target: BenchmarkTarget,
    },
    /// Assemble evaluation artifacts of a run into a comparison report.
    Report {
        #[command(flatten)]
        out: CommonOut,
        /// Directory scanned for evaluation_*.json and trace.csv artifacts.
        #[arg(long)]
        run: PathBuf,
    },
}

#[derive(Subcommand, Debug)]
pub enum BenchmarkTarget {
    /// Grid search over decision trees and forests.
    Trees {
        #[command(flatten)]
        out: CommonOut,
        #[arg(long)]
        data: PathBuf,
        /// Grid JSON: max_depths, min_samples_leafs, n_trees, mode.
        #[arg(long)]
        grid: PathBuf,
    },
}

// ---------------------------------------------------------------------------
// Artifact containers
// ---------------------------------------------------------------------------

/// Cached binning output consumed by features, medic, and sensitivity.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IngestArtifact {
    pub cube: Tensor,
    pub timeline: Timeline,
    pub grid: GridSpec,
    pub externals: ExternalData,
    pub bin_report: BinReport,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    command: String,
    config: serde_json::Value,
    config_hash: String,
    crate_version: String,
    seed: u64,
}

fn fnv1a(bytes: &[u8]) -> String {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    format!("{h:016x}")
}

/// Atomic write: temp file in the same directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension().and_then(|e| e.to_str()).unwrap_or("bin")
    ));
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut body = serde_json::to_string_pretty(value)?;
    body.push('\n');
    write_atomic(path, body.as_bytes())
}

fn write_manifest(out: &Path, command: &str, config: serde_json::Value, seed: u64) -> Result<()> {
    let config_hash = fnv1a(serde_json::to_string(&config)?.as_bytes());
    write_json(
        &out.join("manifest.json"),
        &Manifest {
            command: command.into(),
            config,
            config_hash,
            crate_version: env!("CARGO_PKG_VERSION").into(),
            seed,
        },
    )
}

fn parse_grid(s: &str) -> Result<GridSpec> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 6 {
        return Err(Error::Config(format!(
            "grid must be q,p,lat_min,lat_max,lon_min,lon_max; got '{s}'"
        )));
    }
    let num = |i: usize| -> Result<f64> {
        parts[i]
            .trim()
            .parse::<f64>()
            .map_err(|e| Error::Config(format!("bad grid component '{}': {e}", parts[i])))
    };
    let grid = GridSpec {
        q: num(0)? as usize,
        p: num(1)? as usize,
        lat_min: num(2)?,
        lat_max: num(3)?,
        lon_min: num(4)?,
        lon_max: num(5)?,
    };
    grid.validate()?;
    Ok(grid)
}

fn parse_time(s: &str) -> Result<DateTime<Utc>> {
    DateTime::parse_from_rfc3339(s)
        .map(|t| t.with_timezone(&Utc))
        .map_err(|e| Error::Config(format!("bad timestamp '{s}': {e}")))
}

fn load_externals(
    weather: &Option<PathBuf>,
    events: &Option<PathBuf>,
    holidays: &Option<PathBuf>,
) -> Result<ExternalData> {
    Ok(ExternalData {
        weather: weather.as_ref().map(|p| read_weather_csv(p)).transpose()?,
        events: events
            .as_ref()
            .map(|p| read_events_csv(p))
            .transpose()?
            .unwrap_or_default(),
        holidays: holidays
            .as_ref()
            .map(|p| read_holidays_csv(p))
            .transpose()?
            .unwrap_or_default(),
    })
}

fn load_dataset(path: &Path) -> Result<DemandDataset> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

fn load_ingest(path: &Path) -> Result<IngestArtifact> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

// ---------------------------------------------------------------------------
// Dispatch
// ---------------------------------------------------------------------------

/// Parses process arguments, runs the command, and returns the exit code.
pub fn run_cli() -> i32 {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Ingest {
            out,
            incidents,
            weather,
            events,
            holidays,
            grid,
            granularity,
            start,
            end,
            category,
        } => cmd_ingest(
            out, incidents, weather, events, holidays, &grid, granularity, &start, &end, &category,
        ),
        Command::Features {
            out,
            ingest,
            look_back,
            prune_threshold,
            no_prune,
            train_fraction,
            val_fraction,
            test_fraction,
        } => cmd_features(
            out,
            ingest,
            look_back,
            (!no_prune).then_some(prune_threshold),
            SplitFractions {
                train: train_fraction,
                val: val_fraction,
                test: test_fraction,
            },
        ),
        Command::Synth {
            out,
            config,
            periods,
            granularity,
            grid,
            emit_records,
        } => cmd_synth(out, config, periods, granularity, grid, emit_records),
        Command::Tune {
            out,
            data,
            model,
            strategy,
            budget_init,
            budget,
            dropout_dtilde,
            dropout_p,
            feature_selection,
            space,
            partition,
            train_epochs,
            train_patience,
            candidates,
        } => cmd_tune(TuneArgs {
            out,
            data,
            model,
            strategy,
            budget_init,
            budget,
            dropout_dtilde,
            dropout_p,
            feature_selection,
            space,
            partition,
            train_epochs,
            train_patience,
            candidates,
        }),
        Command::Train {
            out,
            data,
            spec,
            default,
            max_epochs,
            patience,
        } => cmd_train(out, data, spec, default, max_epochs, patience),
        Command::Predict {
            out,
            model,
            data,
            split,
        } => cmd_predict(out, model, data, &split),
        Command::Evaluate {
            out,
            model,
            data,
            id,
        } => cmd_evaluate(out, model, data, &id),
        Command::Medic {
            out,
            ingest,
            data,
            weeks,
        } => cmd_medic(out, ingest, data, weeks),
        Command::Shap {
            out,
            model,
            data,
            background,
            samples,
            permutations,
            cell,
        } => cmd_shap(out, model, data, background, samples, permutations, cell),
        Command::Sensitivity {
            out,
            incidents,
            weather,
            events,
            holidays,
            grid,
            start,
            end,
            granularities,
            look_back,
            max_epochs,
            patience,
            category,
        } => cmd_sensitivity(
            out,
            incidents,
            weather,
            events,
            holidays,
            &grid,
            &start,
            &end,
            granularities,
            look_back,
            max_epochs,
            patience,
            &category,
        ),
        Command::Benchmark { target } => match target {
            BenchmarkTarget::Trees { out, data, grid } => cmd_benchmark_trees(out, data, grid),
        },
        Command::Report { out, run } => cmd_report(out, run),
    }
}

// ---------------------------------------------------------------------------
// Subcommand bodies
// ---------------------------------------------------------------------------

#[allow(clippy::too_many_arguments)]
fn cmd_ingest(
    out: CommonOut,
    incidents: PathBuf,
    weather: Option<PathBuf>,
    events: Option<PathBuf>,
    holidays: Option<PathBuf>,
    grid: &str,
    granularity: u32,
    start: &str,
    end: &str,
    category: &str,
) -> Result<()> {
    let grid = parse_grid(grid)?;
    let range = (parse_time(start)?, parse_time(end)?);
    let config = RunConfig {
        incidents: Some(incidents.clone()),
        weather: weather.clone(),
        events: events.clone(),
        holidays: holidays.clone(),
        out_dir: out.out.clone(),
        grid,
        granularity_hours: granularity,
        look_back: 6,
        fractions: SplitFractions::default(),
        seed: out.seed,
    };
    config.validate()?;

    let mut records = read_incidents_csv(&incidents)?;
    if !category.is_empty() {
        records.retain(|r| r.category == category);
    }
    let externals = load_externals(&weather, &events, &holidays)?;
    let (cube, timeline, bin_report) = bin_incidents(&records, &grid, granularity, range)?;
    if bin_report.dropped_outside_box > 0 || bin_report.dropped_outside_range > 0 {
        eprintln!(
            "warning: dropped {} records outside the box, {} outside the range",
            bin_report.dropped_outside_box, bin_report.dropped_outside_range
        );
    }
    let artifact = IngestArtifact {
        cube,
        timeline,
        grid,
        externals,
        bin_report,
    };
    write_json(&out.out.join("ingest.json"), &artifact)?;
    write_manifest(&out.out, "ingest", serde_json::to_value(&config)?, out.seed)
}

fn cmd_features(
    out: CommonOut,
    ingest: PathBuf,
    look_back: usize,
    prune_threshold: Option<f64>,
    fractions: SplitFractions,
) -> Result<()> {
    std::fs::create_dir_all(&out.out)?;
    let artifact = load_ingest(&ingest)?;
    let (ds, prune) = build_dataset(
        &artifact.cube,
        &artifact.timeline,
        &artifact.grid,
        &artifact.externals,
        look_back,
        fractions,
        prune_threshold,
    )?;
    write_json(&out.out.join("ds.bin"), &ds)?;
    if let Some(report) = &prune {
        write_json(&out.out.join("prune.json"), report)?;
    }
    write_manifest(
        &out.out,
        "features",
        json!({
            "ingest": ingest,
            "look_back": look_back,
            "prune_threshold": prune_threshold,
            "fractions": fractions,
        }),
        out.seed,
    )
}

fn cmd_synth(
    out: CommonOut,
    config_path: Option<PathBuf>,
    periods: Option<usize>,
    granularity: Option<u32>,
    grid: Option<String>,
    emit_records: bool,
) -> Result<()> {
    std::fs::create_dir_all(&out.out)?;
    let mut config: SynthConfig = match &config_path {
        Some(p) => serde_json::from_str(&std::fs::read_to_string(p)?)?,
        None => SynthConfig::default(),
    };
    if let Some(p) = periods {
        config.periods = p;
    }
    if let Some(g) = granularity {
        config.granularity_hours = g;
    }
    if let Some(spec) = &grid {
        let parts: Vec<&str> = spec.split(',').collect();
        if parts.len() != 2 {
            return Err(Error::Config(format!("synth grid must be q,p; got '{spec}'")));
        }
        config.q = parts[0]
            .trim()
            .parse()
            .map_err(|e| Error::Config(format!("bad q: {e}")))?;
        config.p = parts[1]
            .trim()
            .parse()
            .map_err(|e| Error::Config(format!("bad p: {e}")))?;
    }
    config.emit_records = config.emit_records || emit_records;

    let mut rng = stage_rng(out.seed, stage::SYNTH);
    let synth = synth_generate(&config, &mut rng)?;
    let artifact = IngestArtifact {
        cube: synth.cube.clone(),
        timeline: synth.timeline,
        grid: synth.grid,
        externals: synth.externals.clone(),
        bin_report: BinReport {
            binned: synth.cube.sum() as usize,
            ..Default::default()
        },
    };
    write_json(&out.out.join("ingest.json"), &artifact)?;
    write_json(&out.out.join("truth.json"), &synth.truth)?;
    if let Some(weather) = &synth.externals.weather {
        write_weather_csv(&out.out.join("weather.csv"), weather)?;
    }
    if config.emit_records {
        write_incidents_csv(&out.out.join("incidents.csv"), &synth.records)?;
    }
    write_manifest(&out.out, "synth", serde_json::to_value(&config)?, out.seed)
}

struct TuneArgs {
    out: CommonOut,
    data: PathBuf,
    model: String,
    strategy: String,
    budget_init: usize,
    budget: usize,
    dropout_dtilde: f64,
    dropout_p: f64,
    feature_selection: bool,
    space: Option<PathBuf>,
    partition: Option<PathBuf>,
    train_epochs: usize,
    train_patience: usize,
    candidates: usize,
}

fn cmd_tune(args: TuneArgs) -> Result<()> {
    std::fs::create_dir_all(&args.out.out)?;
    let ds = load_dataset(&args.data)?;
    let kind = match args.model.as_str() {
        "mlp" => ModelKind::Mlp,
        _ => ModelKind::Cnn,
    };
    let (default_sp, default_partition) = match kind {
        ModelKind::Cnn => default_space(&ds.schema, args.feature_selection)?,
        ModelKind::Mlp => default_space_mlp(&ds.schema, args.feature_selection)?,
    };
    let space: SearchSpace = match &args.space {
        Some(p) => serde_json::from_str(&std::fs::read_to_string(p)?)?,
        None => default_sp,
    };
    let mut partition: Partition = match &args.partition {
        Some(p) => serde_json::from_str(&std::fs::read_to_string(p)?)?,
        None => default_partition,
    };

    let schema = ds.schema.clone();
    let opts = TrainOptions {
        max_epochs: args.train_epochs,
        patience: args.train_patience,
        fractions: SplitFractions::default(),
        seed: args.out.seed,
    };
    let mut trial_counter: u64 = 0;
    let mut objective = |theta: &Theta| -> Result<f64> {
        trial_counter += 1;
        let spec = ModelSpec::from_assignment(kind, &schema, &space, theta)?;
        let mut rng = stage_rng(args.out.seed ^ trial_counter, stage::TRAIN);
        let model = build_model(&spec, &schema, &mut rng)?;
        let trained = train(model, &ds, &opts)?;
        Ok(trained
            .history
            .iter()
            .map(|e| e.val_loss)
            .fold(f64::INFINITY, f64::min))
    };

    let bo_options = BoOptions {
        candidates: args.candidates,
        ..Default::default()
    };
    let mut rng = stage_rng(args.out.seed, stage::TUNE);
    let result: TuneResult = match args.strategy.as_str() {
        "random" => bo_run(
            &mut objective,
            &space,
            args.budget_init + args.budget,
            0,
            SurrogateKind::Gp,
            &mut rng,
            &bo_options,
        )?,
        "bo-gp" => bo_run(
            &mut objective,
            &space,
            args.budget_init,
            args.budget,
            SurrogateKind::Gp,
            &mut rng,
            &bo_options,
        )?,
        "bo-rf" => bo_run(
            &mut objective,
            &space,
            args.budget_init,
            args.budget,
            SurrogateKind::RandomForest,
            &mut rng,
            &bo_options,
        )?,
        "bo-et" => bo_run(
            &mut objective,
            &space,
            args.budget_init,
            args.budget,
            SurrogateKind::ExtraTrees,
            &mut rng,
            &bo_options,
        )?,
        "bo-dropout" => bo_dropout_run(
            &mut objective,
            &space,
            args.budget_init,
            args.budget,
            args.dropout_dtilde,
            args.dropout_p,
            &mut rng,
            &bo_options,
        )?,
        "bo-hier" => {
            if args.partition.is_none() {
                distribute_budget(&mut partition, args.budget);
            }
            hierarchical_bo_run(
                &mut objective,
                &space,
                &partition,
                args.budget_init.max(1),
                &mut rng,
                &bo_options,
            )?
        }
        other => return Err(Error::Config(format!("unknown strategy {other}"))),
    };

    let incumbent = result.incumbent_trial();
    let incumbent_spec = ModelSpec::from_assignment(kind, &schema, &space, &incumbent.theta)?;
    write_atomic(
        &args.out.out.join("trace.csv"),
        trace_csv(&space, &result.trials).as_bytes(),
    )?;
    write_json(&args.out.out.join("spec.json"), &incumbent_spec)?;
    write_json(
        &args.out.out.join("incumbent.json"),
        &json!({
            "value": incumbent.value,
            "iteration": incumbent.iteration,
            "theta": theta_to_json(&space, &incumbent.theta),
            "spec": incumbent_spec,
            "trials": result.trials.len(),
        }),
    )?;
    write_json(&args.out.out.join("space.json"), &space)?;
    write_manifest(
        &args.out.out,
        "tune",
        json!({
            "data": args.data,
            "model": args.model,
            "strategy": args.strategy,
            "budget_init": args.budget_init,
            "budget": args.budget,
            "dropout_dtilde": args.dropout_dtilde,
            "dropout_p": args.dropout_p,
            "feature_selection": args.feature_selection,
            "train_epochs": args.train_epochs,
            "train_patience": args.train_patience,
            "candidates": args.candidates,
        }),
        args.out.seed,
    )
}

/// Splits a total evaluation budget over the partition sets: every set
/// keeps at most the protocol's per-set random share, the rest becomes BO
/// iterations. The remainder goes to the earliest sets.
fn distribute_budget(partition: &mut Partition, total: usize) {
    let k = partition.sets.len().max(1);
    let base = total / k;
    let remainder = total % k;
    for (i, set) in partition.sets.iter_mut().enumerate() {
        let set_total = base + usize::from(i < remainder);
        let random = DEFAULT_SET_RANDOM
            .min(set_total.div_ceil(5))
            .min(set_total);
        set.random_budget = random;
        set.bo_budget = set_total - random;
    }
}

fn cmd_train(
    out: CommonOut,
    data: PathBuf,
    spec_path: Option<PathBuf>,
    default_kind: Option<String>,
    max_epochs: usize,
    patience: usize,
) -> Result<()> {
    std::fs::create_dir_all(&out.out)?;
    let ds = load_dataset(&data)?;
    let spec: ModelSpec = match (&spec_path, &default_kind) {
        (Some(p), _) => serde_json::from_str(&std::fs::read_to_string(p)?)?,
        (None, Some(kind)) => {
            let kind = match kind.as_str() {
                "mlp" => ModelKind::Mlp,
                _ => ModelKind::Cnn,
            };
            ModelSpec::default_for(kind, &ds.schema)
        }
        (None, None) => {
            return Err(Error::Config("train needs --spec or --default".into()));
        }
    };
    let mut rng = stage_rng(out.seed, stage::TRAIN);
    let model = build_model(&spec, &ds.schema, &mut rng)?;
    let opts = TrainOptions {
        max_epochs,
        patience,
        fractions: SplitFractions::default(),
        seed: out.seed,
    };
    let trained = train(model, &ds, &opts)?;
    save_model(&trained, &out.out)?;
    let mut history_csv = String::from("epoch,train_loss,val_loss\n");
    for e in &trained.history {
        history_csv.push_str(&format!("{},{},{}\n", e.epoch, e.train_loss, e.val_loss));
    }
    write_atomic(&out.out.join("history.csv"), history_csv.as_bytes())?;
    write_manifest(
        &out.out,
        "train",
        json!({
            "data": data,
            "spec": spec,
            "max_epochs": max_epochs,
            "patience": patience,
        }),
        out.seed,
    )
}

fn split_indices(ds: &DemandDataset, split: &str) -> Vec<usize> {
    match split {
        "train" => ds.indices(SplitLabel::Train),
        "val" => ds.indices(SplitLabel::Val),
        "test" => ds.indices(SplitLabel::Test),
        _ => (0..ds.len()).collect(),
    }
}

fn cmd_predict(out: CommonOut, model_dir: PathBuf, data: PathBuf, split: &str) -> Result<()> {
    std::fs::create_dir_all(&out.out)?;
    let model = load_model(&model_dir)?;
    let ds = load_dataset(&data)?;
    let mut csv = String::from("timestamp,row,col,prediction\n");
    for &i in &split_indices(&ds, split) {
        let heat = model.predict_demand(&ds.instances[i])?;
        let ts = ds.timestamps[i].to_rfc3339_opts(chrono::SecondsFormat::Secs, true);
        for r in 0..ds.schema.q {
            for c in 0..ds.schema.p {
                csv.push_str(&format!("{ts},{r},{c},{}\n", heat.at(&[r, c])));
            }
        }
    }
    write_atomic(&out.out.join("predictions.csv"), csv.as_bytes())?;
    write_manifest(
        &out.out,
        "predict",
        json!({ "model": model_dir, "data": data, "split": split }),
        out.seed,
    )
}

fn cmd_evaluate(out: CommonOut, model_dir: PathBuf, data: PathBuf, id: &str) -> Result<()> {
    std::fs::create_dir_all(&out.out)?;
    let model = load_model(&model_dir)?;
    let ds = load_dataset(&data)?;
    let (preds, actuals) = test_predictions(&model, &ds)?;
    let (y_min, y_max) = ds.target_range();
    let report = evaluate_predictions(
        id,
        ds.schema.granularity_hours,
        &preds,
        &actuals,
        (y_min, y_max),
        &test_fingerprint(&ds),
    )?;
    write_json(&out.out.join(format!("evaluation_{id}.json")), &report)?;
    write_manifest(
        &out.out,
        "evaluate",
        json!({ "model": model_dir, "data": data, "id": id }),
        out.seed,
    )
}

fn cmd_medic(out: CommonOut, ingest: PathBuf, data: PathBuf, weeks: usize) -> Result<()> {
    std::fs::create_dir_all(&out.out)?;
    let artifact = load_ingest(&ingest)?;
    let ds = load_dataset(&data)?;
    let (preds, actuals) = medic_test_predictions(&artifact.cube, &ds, weeks)?;
    let (y_min, y_max) = ds.target_range();
    let report = evaluate_predictions(
        "medic",
        ds.schema.granularity_hours,
        &preds,
        &actuals,
        (y_min, y_max),
        &test_fingerprint(&ds),
    )?;
    write_json(&out.out.join("evaluation_medic.json"), &report)?;
    write_manifest(
        &out.out,
        "medic",
        json!({ "ingest": ingest, "data": data, "weeks": weeks }),
        out.seed,
    )
}

#[allow(clippy::too_many_arguments)]
fn cmd_shap(
    out: CommonOut,
    model_dir: PathBuf,
    data: PathBuf,
    background: usize,
    samples: usize,
    permutations: usize,
    cell: Option<String>,
) -> Result<()> {
    std::fs::create_dir_all(&out.out)?;
    let model = load_model(&model_dir)?;
    let ds = load_dataset(&data)?;
    let target = match &cell {
        Some(spec) => {
            let parts: Vec<&str> = spec.split(',').collect();
            if parts.len() != 2 {
                return Err(Error::Config(format!("cell must be row,col; got '{spec}'")));
            }
            AttributionTarget::Cell(
                parts[0]
                    .trim()
                    .parse()
                    .map_err(|e| Error::Config(format!("bad row: {e}")))?,
                parts[1]
                    .trim()
                    .parse()
                    .map_err(|e| Error::Config(format!("bad col: {e}")))?,
            )
        }
        None => AttributionTarget::HeatmapTotal,
    };
    let config = AttributionConfig {
        background_size: background,
        eval_samples: samples,
        permutations,
        seed: stage_rng(out.seed, stage::SHAP).random::<u64>(),
        target,
    };
    let table = attribution_report(&model, &ds, &config)?;
    write_json(&out.out.join("attribution.json"), &table)?;
    write_atomic(
        &out.out.join("attribution.csv"),
        attribution_csv(&table).as_bytes(),
    )?;
    write_manifest(
        &out.out,
        "shap",
        json!({
            "model": model_dir,
            "data": data,
            "background": background,
            "samples": samples,
            "permutations": permutations,
            "cell": cell,
        }),
        out.seed,
    )
}

#[allow(clippy::too_many_arguments)]
fn cmd_sensitivity(
    out: CommonOut,
    incidents: PathBuf,
    weather: Option<PathBuf>,
    events: Option<PathBuf>,
    holidays: Option<PathBuf>,
    grid: &str,
    start: &str,
    end: &str,
    granularities: Vec<u32>,
    look_back: usize,
    max_epochs: usize,
    patience: usize,
    category: &str,
) -> Result<()> {
    std::fs::create_dir_all(&out.out)?;
    let grid = parse_grid(grid)?;
    let range = (parse_time(start)?, parse_time(end)?);
    let mut records = read_incidents_csv(&incidents)?;
    if !category.is_empty() {
        records.retain(|r| r.category == category);
    }
    let externals = load_externals(&weather, &events, &holidays)?;
    let config = SensitivityConfig {
        granularities: granularities.clone(),
        look_back,
        max_epochs,
        patience,
        seed: stage_rng(out.seed, stage::SENSITIVITY).random::<u64>(),
        ..Default::default()
    };
    let rows = sensitivity_run(&records, &grid, range, &externals, &config, &|schema| {
        ModelSpec::default_for(ModelKind::Cnn, schema)
    })?;
    write_json(&out.out.join("sensitivity.json"), &rows)?;
    write_atomic(
        &out.out.join("sensitivity.csv"),
        sensitivity_csv(&rows).as_bytes(),
    )?;
    // NRMSE curves per model over granularity
    let mut series: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for row in &rows {
        series
            .entry(row.report.model_id.clone())
            .or_default()
            .push((row.granularity_hours as f64, row.report.nrmse));
    }
    let svg = svg_line_chart(
        "NRMSE by time granularity",
        &series.into_iter().collect::<Vec<_>>(),
    );
    write_atomic(&out.out.join("sensitivity.svg"), svg.as_bytes())?;
    write_manifest(
        &out.out,
        "sensitivity",
        json!({
            "incidents": incidents,
            "grid": grid,
            "start": start,
            "end": end,
            "granularities": granularities,
            "look_back": look_back,
            "max_epochs": max_epochs,
            "patience": patience,
        }),
        out.seed,
    )
}

fn cmd_benchmark_trees(out: CommonOut, data: PathBuf, grid_path: PathBuf) -> Result<()> {
    std::fs::create_dir_all(&out.out)?;
    let ds = load_dataset(&data)?;
    let grid: TreeGrid = serde_json::from_str(&std::fs::read_to_string(&grid_path)?)?;
    let (train_x, train_y) = to_tabular(&ds, SplitLabel::Train);
    let (val_x, val_y) = to_tabular(&ds, SplitLabel::Val);
    let (test_x, test_y) = to_tabular(&ds, SplitLabel::Test);
    let split = TabularSplit {
        train_x: &train_x,
        train_y: &train_y,
        val_x: &val_x,
        val_y: &val_y,
        test_x: &test_x,
        test_y: &test_y,
    };
    let seed = stage_rng(out.seed, stage::TREES).random::<u64>();
    let outcome = grid_search_trees(&grid, &split, seed)?;

    let mut csv = String::from("max_depth,min_samples_leaf,n_trees,train_mse,val_mse,test_mse\n");
    for r in &outcome.rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.max_depth, r.min_samples_leaf, r.n_trees, r.train_mse, r.val_mse, r.test_mse
        ));
    }
    write_atomic(&out.out.join("grid_search.csv"), csv.as_bytes())?;

    // refit the incumbent single tree to report its selected features
    let inc = &outcome.rows[outcome.incumbent];
    let selected = if inc.n_trees == 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tree = fit_tree(&train_x, &train_y, inc.max_depth, inc.min_samples_leaf, &mut rng)?;
        let names = crate::datasets::tabular_feature_names(&ds.schema);
        tree.selected_features()
            .into_iter()
            .map(|(f, depth)| json!({ "feature": names[f], "min_depth": depth }))
            .collect::<Vec<_>>()
    } else {
        vec![]
    };
    write_json(
        &out.out.join("incumbent.json"),
        &json!({ "incumbent": inc, "selected_features": selected }),
    )?;
    write_manifest(
        &out.out,
        "benchmark trees",
        json!({ "data": data, "grid": grid_path }),
        out.seed,
    )
}

fn cmd_report(out: CommonOut, run: PathBuf) -> Result<()> {
    std::fs::create_dir_all(&out.out)?;
    let mut reports: Vec<EvaluationReport> = Vec::new();
    let mut names: Vec<String> = Vec::new();
    let mut entries: Vec<PathBuf> = std::fs::read_dir(&run)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .collect();
    entries.sort();
    for path in entries {
        let name = path
            .file_name()
            .and_then(|n| n.to_str())
            .unwrap_or_default()
            .to_string();
        if name.starts_with("evaluation_") && name.ends_with(".json") {
            reports.push(serde_json::from_str(&std::fs::read_to_string(&path)?)?);
            names.push(name);
        }
    }
    let comparison = if reports.len() >= 2 {
        let table = compare_models(&reports)?;
        write_atomic(
            &out.out.join("comparison.csv"),
            comparison_csv(&table).as_bytes(),
        )?;
        Some(table)
    } else {
        None
    };
    // tuning trace chart when the run has one
    let trace_path = run.join("trace.csv");
    if trace_path.exists() {
        let mut points = Vec::new();
        for (i, line) in std::fs::read_to_string(&trace_path)?.lines().enumerate().skip(1) {
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() >= 4 {
                if let Ok(best) = cells[3].parse::<f64>() {
                    points.push((i as f64, best));
                }
            }
        }
        if !points.is_empty() {
            let svg = svg_line_chart("Tuning trace: best so far", &[("best".into(), points)]);
            write_atomic(&out.out.join("trace.svg"), svg.as_bytes())?;
        }
    }
    write_json(
        &out.out.join("report.json"),
        &json!({
            "evaluations": names,
            "reports": reports,
            "comparison": comparison,
        }),
    )?;
    write_manifest(&out.out, "report", json!({ "run": run }), out.seed)
}
