//! Command-line front end. Every command reads one JSON [`PipelineConfig`]
//! and returns a one-line summary; failures carry an exit code.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::info;
use serde_json::json;

use crate::ais::{parse_ais_csv, CsvSchema, ParseError};
use crate::cellmap::{build_cell_map, export_performance_map, CellMap, CellMapError};
use crate::config::PipelineConfig;
use crate::contrario::{detect_tracks, sweep_epsilon, ContrarioError, DetectError};
use crate::report::{evaluate, read_verdicts, verdicts_geojson, write_verdicts_jsonl};
use crate::store::{preprocess, StoreError, TrackStore};
use crate::synth::read_labels;
use crate::vrnn::{train, ModelError, TrainHistory, VrnnModel};

#[derive(Debug, Parser)]
#[command(name = "geotracknet", version, about = "Maritime anomaly detection on AIS tracks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Worker threads for per-track parallelism (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ConfigArg {
    /// Pipeline configuration (JSON).
    #[arg(long)]
    pub config: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse AIS CSV files into encoded track stores.
    Preprocess(ConfigArg),
    /// Fit the model; writes the checkpoint and the per-epoch history.
    Train(ConfigArg),
    /// Score the validation set and fit the per-cell distributions.
    BuildMap(ConfigArg),
    /// Test every track of the test store.
    Detect {
        #[command(flatten)]
        config: ConfigArg,
        /// Comma-separated thresholds; prints abnormal counts instead of verdicts.
        #[arg(long, value_delimiter = ',')]
        sweep: Option<Vec<f64>>,
    },
    /// Compare verdicts with ground-truth labels.
    Eval(ConfigArg),
}

impl Command {
    pub fn config_path(&self) -> &Path {
        match self {
            Command::Preprocess(c) | Command::Train(c) | Command::BuildMap(c) | Command::Eval(c) => &c.config,
            Command::Detect { config, .. } => &config.config,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numeric(String),
}

impl CliError {
    /// 1 usage or configuration, 2 data, 3 numeric failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Compute(_) | ModelError::NonFiniteValue { .. } | ModelError::Diverged { .. } => {
                CliError::Numeric(e.to_string())
            }
            ModelError::Config(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<CellMapError> for CliError {
    fn from(e: CellMapError) -> Self {
        match e {
            CellMapError::Model(m) => m.into(),
            CellMapError::Config(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<StoreError> for CliError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::Config(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<ContrarioError> for CliError {
    fn from(e: ContrarioError) -> Self {
        match e {
            ContrarioError::Config(_) => CliError::Usage(e.to_string()),
            ContrarioError::Domain(_) => CliError::Numeric(e.to_string()),
            ContrarioError::Shape(_) => CliError::Data(e.to_string()),
        }
    }
}

impl From<DetectError> for CliError {
    fn from(e: DetectError) -> Self {
        match e {
            DetectError::Model(m) => m.into(),
            DetectError::Contrario(c) => c.into(),
        }
    }
}

fn data<E: std::fmt::Display>(path: &Path) -> impl FnOnce(E) -> CliError + '_ {
    move |e| CliError::Data(format!("{}: {e}", path.display()))
}

fn required<'a>(p: &'a Option<PathBuf>, name: &str) -> Result<&'a Path, CliError> {
    p.as_deref().ok_or_else(|| CliError::Usage(format!("config sets no `paths.{name}`")))
}

fn load_store(cfg: &PipelineConfig, path: &Path) -> Result<TrackStore, CliError> {
    let store = TrackStore::load(path).map_err(data(path))?;
    if store.spec != cfg.spec() {
        return Err(CliError::Data(format!("{}: encoded with a different four-hot spec", path.display())));
    }
    Ok(store)
}

fn load_model(cfg: &PipelineConfig) -> Result<VrnnModel, CliError> {
    let path = required(&cfg.paths.checkpoint, "checkpoint")?;
    let model = VrnnModel::load(path).map_err(data(path))?;
    if model.spec != cfg.spec() {
        return Err(CliError::Data(format!("{}: trained with a different four-hot spec", path.display())));
    }
    Ok(model)
}

/// `<dir>/<stem>.errors.csv` beside a store file.
pub fn errors_sidecar(store: &Path) -> PathBuf {
    let stem = store.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    store.with_file_name(format!("{stem}.errors.csv"))
}

fn write_parse_errors(path: &Path, errors: &[ParseError]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(data(path))?;
    w.write_record(["row", "reason"]).map_err(data(path))?;
    for e in errors {
        w.write_record([e.row.to_string(), e.reason.clone()]).map_err(data(path))?;
    }
    w.flush().map_err(data(path))
}

pub fn write_history_csv(path: &Path, history: &TrainHistory) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(data(path))?;
    w.write_record(["epoch", "train_elbo", "validation_elbo", "skipped_batches"]).map_err(data(path))?;
    for e in &history.epochs {
        w.write_record([
            e.epoch.to_string(),
            e.train_elbo.to_string(),
            e.validation_elbo.to_string(),
            e.skipped_batches.to_string(),
        ])
        .map_err(data(path))?;
    }
    w.flush().map_err(data(path))
}

fn cmd_preprocess(cfg: &PipelineConfig) -> Result<String, CliError> {
    let p = &cfg.paths;
    let pairs = [
        ("train", &p.train_csv, &p.train_store),
        ("validation", &p.validation_csv, &p.validation_store),
        ("test", &p.test_csv, &p.test_store),
    ];
    let spec = cfg.spec();
    let mut lines = Vec::new();
    for (name, csv_path, store_path) in pairs {
        let Some(csv_path) = csv_path else { continue };
        let store_path = required(store_path, &format!("{name}_store"))?;
        let file = fs::File::open(csv_path).map_err(data(csv_path))?;
        let (messages, errors) = parse_ais_csv(file, &CsvSchema::default()).map_err(data(csv_path))?;
        let (tracks, mut summary) = preprocess(&messages, &spec, &cfg.preprocess)?;
        summary.parse_errors = errors.len();
        summary.messages_read += errors.len();
        write_parse_errors(&errors_sidecar(store_path), &errors)?;
        let store = TrackStore { spec: spec.clone(), summary, tracks };
        store.save(store_path).map_err(data(store_path))?;
        info!("{name}: {:?}", store.summary);
        lines.push(format!("{name}: {} tracks ({} parse errors)", store.tracks.len(), errors.len()));
    }
    if lines.is_empty() {
        return Err(CliError::Usage("config sets no input csv".into()));
    }
    Ok(lines.join("; "))
}

fn cmd_train(cfg: &PipelineConfig) -> Result<String, CliError> {
    let train_set = load_store(cfg, required(&cfg.paths.train_store, "train_store")?)?;
    let valid_set = load_store(cfg, required(&cfg.paths.validation_store, "validation_store")?)?;
    let out = required(&cfg.paths.checkpoint, "checkpoint")?;
    let model = VrnnModel::new(cfg.spec(), cfg.model_config(), cfg.seed)?;
    let (best, history) = train(model, &train_set.tracks, &valid_set.tracks, &cfg.train_config())?;
    best.save(out).map_err(data(out))?;
    if let Some(h) = &cfg.paths.history_csv {
        write_history_csv(h, &history)?;
    }
    Ok(format!(
        "trained {} epochs, best epoch {:?}, validation ELBO {:.4} -> {:.4}",
        history.epochs.len(),
        history.best_epoch,
        history.initial_validation_elbo,
        history.best_validation_elbo
    ))
}

fn cmd_build_map(cfg: &PipelineConfig) -> Result<String, CliError> {
    let model = load_model(cfg)?;
    let valid_set = load_store(cfg, required(&cfg.paths.validation_store, "validation_store")?)?;
    let out = required(&cfg.paths.cellmap, "cellmap")?;
    let map = build_cell_map(&model, &valid_set.tracks, &cfg.map_config())?;
    map.save(out)?;
    if let Some(perf) = &cfg.paths.performance_csv {
        export_performance_map(&map, perf)?;
    }
    Ok(format!(
        "{} active cells of {}, {} samples",
        map.active_cells(),
        map.grid.n_cells(),
        map.total_samples()
    ))
}

fn cmd_detect(cfg: &PipelineConfig, sweep: Option<&[f64]>) -> Result<String, CliError> {
    let model = load_model(cfg)?;
    let map_path = required(&cfg.paths.cellmap, "cellmap")?;
    let map = CellMap::load(map_path)?;
    if map.provenance.model_hash != model.content_hash() {
        return Err(CliError::Data(format!("{}: built from a different checkpoint", map_path.display())));
    }
    let test_set = load_store(cfg, required(&cfg.paths.test_store, "test_store")?)?;
    if let Some(grid) = sweep {
        // the segment search does not depend on epsilon; any valid value works
        let verdicts = detect_tracks(&model, &map, &test_set.tracks, cfg.detector_config(1.0))?;
        let logs: Vec<f64> = verdicts.iter().map(|v| v.segment.log_nfa).collect();
        let table = sweep_epsilon(&logs, grid)?;
        let mut text = String::from("epsilon,abnormal_tracks\n");
        for (e, n) in &table {
            text.push_str(&format!("{e},{n}\n"));
        }
        if let Some(out) = &cfg.paths.sweep_csv {
            fs::write(out, &text).map_err(data(out))?;
        }
        return Ok(text.trim_end().to_string());
    }
    let epsilon =
        cfg.detector.epsilon.ok_or_else(|| CliError::Usage("detect needs `detector.epsilon` or --sweep".into()))?;
    let out = required(&cfg.paths.verdicts, "verdicts")?;
    let verdicts = detect_tracks(&model, &map, &test_set.tracks, cfg.detector_config(epsilon))?;
    let file = fs::File::create(out).map_err(data(out))?;
    let mut w = BufWriter::new(file);
    write_verdicts_jsonl(&verdicts, &mut w).map_err(data(out))?;
    w.flush().map_err(data(out))?;
    if let Some(geo) = &cfg.paths.geojson {
        let pairs: Vec<_> = test_set.tracks.iter().zip(&verdicts).collect();
        let mut doc = verdicts_geojson(&pairs);
        doc["provenance"] = json!({
            "model_hash": map.provenance.model_hash,
            "validation_hash": map.provenance.validation_hash,
            "p": cfg.detector.p,
            "epsilon": epsilon,
            "samples": cfg.detector.samples,
            "seed": cfg.seed,
        });
        fs::write(geo, serde_json::to_string(&doc).expect("geojson serializes")).map_err(data(geo))?;
    }
    let abnormal = verdicts.iter().filter(|v| v.abnormal).count();
    Ok(format!("{abnormal} of {} tracks abnormal at epsilon {epsilon}", verdicts.len()))
}

fn cmd_eval(cfg: &PipelineConfig) -> Result<String, CliError> {
    let vpath = required(&cfg.paths.verdicts, "verdicts")?;
    let lpath = required(&cfg.paths.labels, "labels")?;
    let verdicts = read_verdicts(&fs::read_to_string(vpath).map_err(data(vpath))?).map_err(data(vpath))?;
    let labels = read_labels(&fs::read_to_string(lpath).map_err(data(lpath))?).map_err(data(lpath))?;
    let report = evaluate(&verdicts, &labels);
    let text = serde_json::to_string_pretty(&report).expect("report serializes");
    if let Some(out) = &cfg.paths.eval_report {
        fs::write(out, &text).map_err(data(out))?;
    }
    Ok(format!(
        "detected {}/{} anomalies, {}/{} false positives",
        report.detected, report.anomalies, report.false_positives, report.normals
    ))
}

/// Runs one parsed command.
pub fn run(cli: &Cli) -> Result<String, CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be positive".into()));
        }
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let cfg = PipelineConfig::load(cli.command.config_path()).map_err(CliError::Usage)?;
    match &cli.command {
        Command::Preprocess(_) => cmd_preprocess(&cfg),
        Command::Train(_) => cmd_train(&cfg),
        Command::BuildMap(_) => cmd_build_map(&cfg),
        Command::Detect { sweep, .. } => cmd_detect(&cfg, sweep.as_deref()),
        Command::Eval(_) => cmd_eval(&cfg),
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(summary) => {
            println!("{summary}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
