//! Command implementations behind the `flowcast` binary.
//!
//! Every command writes a `manifest.json` into its output directory recording the
//! resolved configuration, SHA-256 hashes of the files it read and the files it wrote.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use chrono::Duration;
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::arima::{self, ArimaModel, ArimaOrder, FitOptions};
use crate::checkpoint::{bind_graph, Checkpoint};
use crate::error::{Error, Result};
use crate::eval::{self, ForecastReport};
use crate::features::{
    build_dataset, read_weather, write_weather, CalendarEncoder, DatasetOptions, FeatureFrame, HolidayCalendar,
    InputSet, SequenceDataset, WeatherVocab,
};
use crate::geo::{
    attach_pois, bin_geolocations, load_street_graph, read_pings, read_pois, write_pings, write_pois, StreetGraph,
};
use crate::models::{naive_forecast, Arch, Forcing, RecurrentModel, Sequence};
use crate::series::{format_timestamp, parse_timestamp, HourlySeries, Timestamp};
use crate::synth::{generate_city, generate_visits, SynthSpec};
use crate::training::{grid_search, train, GridSpec, RunOutcome, TrainConfig, TrainHistory};

#[derive(Debug, Parser)]
#[command(name = "flowcast", version, about = "Hourly visitor forecasting for points of interest")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic city and its visitor, ping, weather and holiday data
    Generate(GenerateArgs),
    /// Attach POIs, bin pings and build feature tables
    Preprocess(PreprocessArgs),
    /// Train one recurrent model
    Train(TrainArgs),
    /// Grid search over loss, hidden size and visitor normalization
    Gridsearch(GridArgs),
    /// Score a checkpoint or a baseline on the test split
    Evaluate(EvaluateArgs),
    /// Free-running multi-step forecast past the end of the data
    Forecast(ForecastArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ArchArg {
    Naive,
    Arima,
    Rnn,
    Lstm,
    Ctrnn,
    Ctgrn,
}

impl ArchArg {
    pub fn recurrent(self) -> Option<Arch> {
        match self {
            ArchArg::Rnn => Some(Arch::Rnn),
            ArchArg::Lstm => Some(Arch::Lstm),
            ArchArg::Ctrnn => Some(Arch::CtRnn),
            ArchArg::Ctgrn => Some(Arch::CtGrn),
            ArchArg::Naive | ArchArg::Arima => None,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub out: PathBuf,
    /// JSON synthetic-city spec; omitted fields keep their defaults [default: built-in]
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Overrides the spec seed [default: spec seed]
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct PreprocessArgs {
    /// Directory with nodes.csv, edges.csv, pois.csv, counts.csv, pings.csv, weather.csv, holidays.csv
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// First test hour, ISO 8601 [default: split from synth.json]
    #[arg(long)]
    pub split: Option<String>,
    /// Street node table [default: <data>/nodes.csv]
    #[arg(long)]
    pub nodes: Option<PathBuf>,
    /// Street edge list [default: <data>/edges.csv]
    #[arg(long)]
    pub edges: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// key = value training config [default: built-in defaults]
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the config seed [default: config seed]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the config input set [default: config inputs]
    #[arg(long, value_enum)]
    pub inputs: Option<InputSet>,
    /// Teacher forcing for ct-grn
    #[arg(long, value_enum, default_value = "mixed")]
    pub forcing: Forcing,
    /// Euler step in hours for continuous-time models
    #[arg(long, default_value_t = 1.0)]
    pub dt: f64,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    /// Preprocessed directory
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum)]
    pub arch: ArchArg,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Clone, Args)]
pub struct GridArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// key = value grid file (archs, losses, hidden_sizes, normalize, runs) [default: full grid]
    #[arg(long)]
    pub grid: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Trained checkpoint; required unless --arch names a baseline
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Baseline to score instead of a checkpoint [default: from checkpoint]
    #[arg(long, value_enum)]
    pub arch: Option<ArchArg>,
    /// Refit ARIMA coefficients every K test hours; 0 never refits
    #[arg(long, default_value_t = 0)]
    pub refit_every: usize,
    /// Largest ARIMA order searched, as p,d,q
    #[arg(long, default_value = "3,2,3")]
    pub arima_max: String,
}

#[derive(Debug, Clone, Args)]
pub struct ForecastArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Hours to forecast past the last observation
    #[arg(long, default_value_t = 24)]
    pub horizon: usize,
    /// Output CSV `timestamp,poi_id,pred`
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    /// SHA-256 of every input file, keyed by path.
    pub inputs: BTreeMap<String, String>,
    pub seed: Option<u64>,
    pub artifacts: Vec<String>,
    pub version: String,
}

impl RunManifest {
    fn new(command: &str, config: serde_json::Value, seed: Option<u64>) -> Self {
        RunManifest {
            command: command.into(),
            config,
            inputs: BTreeMap::new(),
            seed,
            artifacts: vec![],
            version: env!("CARGO_PKG_VERSION").into(),
        }
    }

    fn input(&mut self, path: &Path) -> Result<()> {
        self.inputs.insert(path.display().to_string(), file_sha256(path)?);
        Ok(())
    }

    fn write(mut self, dir: &Path, name: &str) -> Result<()> {
        self.artifacts.sort();
        let path = dir.join(name);
        let text = serde_json::to_string_pretty(&self).map_err(|e| Error::Invalid(e.to_string()))?;
        std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
    }
}

pub fn file_sha256(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn to_json<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("serializable config")
}

fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(v).map_err(|e| Error::Invalid(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path.display().to_string(), e.line(), e.to_string()))
}

pub fn run(cli: Cli) -> Result<()> {
    crate::parallel::init();
    match cli.command {
        Command::Generate(a) => cmd_generate(&a),
        Command::Preprocess(a) => cmd_preprocess(&a),
        Command::Train(a) => cmd_train(&a),
        Command::Gridsearch(a) => cmd_gridsearch(&a),
        Command::Evaluate(a) => cmd_evaluate(&a),
        Command::Forecast(a) => cmd_forecast(&a),
    }
}

/// Single-line, machine-parseable error description.
pub fn error_line(e: &Error) -> String {
    let msg = e.to_string().replace('\\', "\\\\").replace('"', "\\\"").replace('\n', " ");
    format!("error: kind={} msg=\"{msg}\"", e.kind())
}

pub fn cmd_generate(a: &GenerateArgs) -> Result<()> {
    let mut spec: SynthSpec = match &a.spec {
        Some(p) => read_json(p)?,
        None => SynthSpec::default(),
    };
    if let Some(s) = a.seed {
        spec.seed = s;
    }
    create_dir(&a.out)?;
    let (graph, pois) = generate_city(&spec)?;
    let data = generate_visits(&spec, &graph, &pois)?;
    let out = |n: &str| a.out.join(n);
    graph.write_csv(&out("nodes.csv"), &out("edges.csv"))?;
    write_pois(&out("pois.csv"), &pois)?;
    data.counts.write_csv(&out("counts.csv"))?;
    write_pings(&out("pings.csv"), &data.pings)?;
    write_weather(&out("weather.csv"), &data.weather)?;
    data.holidays.write_csv(&out("holidays.csv"))?;
    write_json(&out("synth.json"), &spec)?;
    let mut m = RunManifest::new("generate", to_json(&spec), Some(spec.seed));
    if let Some(p) = &a.spec {
        m.input(p)?;
    }
    m.artifacts = ["nodes.csv", "edges.csv", "pois.csv", "counts.csv", "pings.csv", "weather.csv", "holidays.csv", "synth.json"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    m.write(&a.out, "manifest.json")
}

/// Normalization constants and layout facts a preprocessed directory carries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreparedMeta {
    pub start: Timestamp,
    pub hours: usize,
    pub split: Timestamp,
    pub graph_hash: String,
    pub year0: i32,
    pub year_span: f64,
    pub d_max: f64,
    pub weather_vocab: Vec<String>,
    pub skipped_pings: usize,
}

/// A preprocessed directory loaded back into memory.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub dir: PathBuf,
    pub meta: PreparedMeta,
    pub graph: StreetGraph,
    pub counts: HourlySeries,
    pub features: FeatureFrame,
    pub node_counts: HourlySeries,
    pub holidays: HolidayCalendar,
}

pub const PREPARED_FILES: [&str; 7] =
    ["graph_nodes.csv", "graph_edges.csv", "counts.csv", "features.csv", "node_counts.csv", "holidays.csv", "meta.json"];

impl Prepared {
    pub fn load(dir: &Path) -> Result<Self> {
        let p = |n: &str| dir.join(n);
        let meta: PreparedMeta = read_json(&p("meta.json"))?;
        let graph = load_street_graph(&p("graph_nodes.csv"), &p("graph_edges.csv"))?;
        if graph.content_hash() != meta.graph_hash {
            return Err(Error::GraphHashMismatch { expected: meta.graph_hash.clone(), actual: graph.content_hash() });
        }
        let counts = HourlySeries::read_csv(&p("counts.csv"))?;
        let features = FeatureFrame { series: HourlySeries::read_csv(&p("features.csv"))? };
        let node_counts = HourlySeries::read_csv(&p("node_counts.csv"))?;
        let holidays = HolidayCalendar::read_csv(&p("holidays.csv"))?;
        if counts.width() != graph.poi_count() {
            return Err(Error::Shape(format!("{} count columns for {} POIs", counts.width(), graph.poi_count())));
        }
        Ok(Prepared { dir: dir.to_path_buf(), meta, graph, counts, features, node_counts, holidays })
    }

    pub fn datasets(&self, options: DatasetOptions) -> Result<(SequenceDataset, SequenceDataset)> {
        let poi_nodes = self.graph.poi_nodes();
        let pings = (options.graph || options.inputs == InputSet::Geo).then_some(&self.node_counts);
        build_dataset(&self.counts, &self.features, pings, Some(&poi_nodes), self.meta.split, options)
    }

    pub fn encoder(&self) -> CalendarEncoder {
        CalendarEncoder {
            holidays: self.holidays.clone(),
            year0: self.meta.year0,
            year_span: self.meta.year_span,
            d_max: self.meta.d_max,
        }
    }

    /// Index of the first test hour.
    pub fn split_index(&self) -> usize {
        (self.meta.split - self.counts.start).num_hours() as usize
    }

    fn record_inputs(&self, m: &mut RunManifest) -> Result<()> {
        for f in PREPARED_FILES {
            m.input(&self.dir.join(f))?;
        }
        Ok(())
    }
}

pub fn cmd_preprocess(a: &PreprocessArgs) -> Result<()> {
    let d = |n: &str| a.data.join(n);
    let nodes = a.nodes.clone().unwrap_or_else(|| d("nodes.csv"));
    let edges = a.edges.clone().unwrap_or_else(|| d("edges.csv"));
    let split = match &a.split {
        Some(s) => parse_timestamp(s).ok_or_else(|| Error::Invalid(format!("bad split timestamp {s:?}")))?,
        None => {
            let spec: SynthSpec = read_json(&d("synth.json"))
                .map_err(|_| Error::Invalid("no --split given and no synth.json in the data directory".into()))?;
            spec.split()
        }
    };
    let street = load_street_graph(&nodes, &edges)?;
    let pois = read_pois(&d("pois.csv"))?;
    let graph = attach_pois(&street, &pois)?;
    let counts = HourlySeries::read_csv(&d("counts.csv"))?;
    if counts.width() != pois.len() {
        return Err(Error::Shape(format!("{} count columns for {} POIs", counts.width(), pois.len())));
    }
    let pings = read_pings(&d("pings.csv"))?;
    let weather = read_weather(&d("weather.csv"))?;
    let holidays = HolidayCalendar::read_csv(&d("holidays.csv"))?;

    let binned = bin_geolocations(&graph, &pings, counts.start, counts.len())?;
    let encoder = CalendarEncoder::fit(holidays.clone(), &counts.start, &split);
    let vocab = WeatherVocab::from_records(&weather, &split);
    let features = FeatureFrame::build(counts.start, counts.len(), &encoder, Some((&weather, &vocab)))?;
    // fails early on a split outside the data
    build_dataset(&counts, &features, None, None, split, DatasetOptions::default())?;

    create_dir(&a.out)?;
    let o = |n: &str| a.out.join(n);
    graph.write_csv(&o("graph_nodes.csv"), &o("graph_edges.csv"))?;
    counts.write_csv(&o("counts.csv"))?;
    features.series.write_csv(&o("features.csv"))?;
    binned.counts.write_csv(&o("node_counts.csv"))?;
    holidays.write_csv(&o("holidays.csv"))?;
    let meta = PreparedMeta {
        start: counts.start,
        hours: counts.len(),
        split,
        graph_hash: graph.content_hash(),
        year0: encoder.year0,
        year_span: encoder.year_span,
        d_max: encoder.d_max,
        weather_vocab: vocab.words().to_vec(),
        skipped_pings: binned.skipped,
    };
    write_json(&o("meta.json"), &meta)?;

    let mut m = RunManifest::new("preprocess", serde_json::json!({ "split": format_timestamp(&split) }), None);
    for p in [&nodes, &edges] {
        m.input(p)?;
    }
    for f in ["pois.csv", "counts.csv", "pings.csv", "weather.csv", "holidays.csv"] {
        m.input(&d(f))?;
    }
    m.artifacts = PREPARED_FILES.iter().map(|s| s.to_string()).collect();
    m.write(&a.out, "manifest.json")
}

fn resolve_config(m: &ModelArgs) -> Result<TrainConfig> {
    let mut cfg = match &m.config {
        Some(p) => TrainConfig::load(p)?,
        None => TrainConfig::default(),
    };
    if let Some(s) = m.seed {
        cfg.seed = s;
    }
    if let Some(i) = m.inputs {
        cfg.inputs = i;
    }
    if !(m.dt > 0.0) {
        return Err(Error::Invalid("dt must be positive".into()));
    }
    Ok(cfg)
}

pub fn dataset_options(arch: Arch, cfg: &TrainConfig) -> DatasetOptions {
    DatasetOptions {
        seq_len: cfg.seq_len,
        inputs: cfg.inputs,
        normalize_visitors: cfg.normalize_visitors,
        graph: arch.is_graph(),
    }
}

/// Fresh model for `arch` sized for `ds`, initialized from the config seed.
pub fn init_model(
    arch: Arch,
    ds: &SequenceDataset,
    graph: &StreetGraph,
    cfg: &TrainConfig,
    forcing: Forcing,
    dt: f64,
) -> Result<RecurrentModel> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let (hidden, binding) = if arch.is_graph() {
        (graph.node_count(), Some(bind_graph(graph)))
    } else {
        (cfg.hidden_size, None)
    };
    let mut m = RecurrentModel::init(arch, ds.input_width, hidden, ds.output_width, binding, &mut rng)?;
    m.dt = dt;
    if arch.is_graph() {
        m.forcing = forcing;
    }
    Ok(m)
}

/// Trains one model on a prepared directory and returns it with its test split.
pub fn train_on(
    prep: &Prepared,
    arch: Arch,
    cfg: &TrainConfig,
    forcing: Forcing,
    dt: f64,
) -> Result<(RecurrentModel, TrainHistory, SequenceDataset)> {
    let (train_ds, test_ds) = prep.datasets(dataset_options(arch, cfg))?;
    let model = init_model(arch, &train_ds, &prep.graph, cfg, forcing, dt)?;
    let (model, history) = train(model, &train_ds, cfg)?;
    Ok((model, history, test_ds))
}

pub fn cmd_train(a: &TrainArgs) -> Result<()> {
    let arch = a
        .arch
        .recurrent()
        .ok_or_else(|| Error::Invalid("baselines are not trained; use evaluate --arch".into()))?;
    let cfg = resolve_config(&a.model)?;
    let prep = Prepared::load(&a.data)?;
    let (model, history, test_ds) = train_on(&prep, arch, &cfg, a.model.forcing, a.model.dt)?;
    create_dir(&a.out)?;
    Checkpoint::from_model(&model, &test_ds.scalers, test_ds.options, Some(cfg.clone())).save(&a.out.join("model.json"))?;
    history.write_csv(&a.out.join("history.csv"))?;
    let mut m = RunManifest::new(
        "train",
        serde_json::json!({ "arch": arch.tag(), "train": cfg, "forcing": a.model.forcing, "dt": a.model.dt }),
        Some(cfg.seed),
    );
    prep.record_inputs(&mut m)?;
    if let Some(c) = &a.model.config {
        m.input(c)?;
    }
    m.artifacts = vec!["model.json".into(), "history.csv".into()];
    m.write(&a.out, "manifest.json")
}

pub fn cmd_gridsearch(a: &GridArgs) -> Result<()> {
    let base = resolve_config(&a.model)?;
    let spec = match &a.grid {
        Some(p) => GridSpec::load(p)?,
        None => GridSpec::default(),
    };
    let prep = Prepared::load(&a.data)?;
    let result = grid_search(&spec, base.seed, |arch, cell, seed| {
        let cfg = TrainConfig {
            loss: cell.loss,
            hidden_size: cell.hidden_size,
            normalize_visitors: cell.normalize_visitors,
            seed,
            ..base.clone()
        };
        let clock = Instant::now();
        let (model, _, test_ds) = train_on(&prep, arch, &cfg, a.model.forcing, a.model.dt)?;
        let train_seconds = clock.elapsed().as_secs_f64();
        let tr = eval::predict_dataset(&model, &test_ds)?;
        let metrics = eval::Metrics::of(&tr.pred, &tr.truth)?;
        let ck = Checkpoint::from_model(&model, &test_ds.scalers, test_ds.options, Some(cfg));
        Ok((RunOutcome { mae: metrics.mae, rmse: metrics.rmse, train_seconds }, ck))
    })?;
    let best_dir = a.out.join("best");
    create_dir(&best_dir)?;
    result.write_csv(&a.out.join("grid.csv"))?;
    let mut artifacts = vec!["grid.csv".to_string()];
    for b in &result.best {
        if let Some(ck) = &b.artifact {
            let name = format!("best/{}.json", b.arch.cli_name());
            ck.save(&a.out.join(&name))?;
            artifacts.push(name);
        }
    }
    let mut m = RunManifest::new("gridsearch", serde_json::json!({ "grid": spec, "base": base }), Some(base.seed));
    prep.record_inputs(&mut m)?;
    for p in [&a.grid, &a.model.config].into_iter().flatten() {
        m.input(p)?;
    }
    m.artifacts = artifacts;
    m.write(&a.out, "manifest.json")
}

fn parse_max_order(s: &str) -> Result<ArimaOrder> {
    let v: Vec<usize> = s.split(',').map(|x| x.trim().parse()).collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Invalid(format!("bad ARIMA order bound {s:?}")))?;
    match v[..] {
        [p, d, q] => Ok(ArimaOrder::new(p, d, q)),
        _ => Err(Error::Invalid(format!("ARIMA order bound needs p,d,q, got {s:?}"))),
    }
}

/// Per-POI ARIMA fit on the training hours and rolling forecasts over the test hours.
pub fn arima_forecasts(
    counts: &HourlySeries,
    split_index: usize,
    max: ArimaOrder,
    refit_every: Option<usize>,
    opts: FitOptions,
) -> Result<(HourlySeries, Vec<(usize, ArimaModel)>)> {
    let grid = ArimaOrder::grid(max.p, max.d, max.q);
    let per_poi: Vec<(Vec<f64>, ArimaModel)> = (0..counts.width())
        .into_par_iter()
        .map(|k| {
            let series = counts.column(k);
            let order = arima::select_order(&series[..split_index], &grid, opts)?;
            let mut model = arima::fit_css(&series[..split_index], order, opts)?;
            let fitted = model.clone();
            let preds = arima::rolling_forecast(&mut model, &series[split_index..], refit_every, opts);
            Ok((preds, fitted))
        })
        .collect::<Result<_>>()?;
    let hours = counts.len() - split_index;
    let mut out = HourlySeries::zeros(counts.timestamp(split_index), hours, counts.columns.clone());
    for (k, (preds, _)) in per_poi.iter().enumerate() {
        for (t, v) in preds.iter().enumerate() {
            out.values[t * counts.width() + k] = *v;
        }
    }
    Ok((out, per_poi.into_iter().map(|(_, m)| m).enumerate().collect()))
}

fn train_minutes_near(checkpoint: &Path) -> f64 {
    let path = checkpoint.with_file_name("history.csv");
    let Ok(mut r) = csv::Reader::from_path(path) else { return 0.0 };
    r.records()
        .filter_map(|r| r.ok())
        .filter_map(|r| r.get(4).and_then(|s| s.parse::<f64>().ok()))
        .last()
        .map_or(0.0, |s| s / 60.0)
}

/// Builds the report for `evaluate` without writing anything.
pub fn evaluate_report(a: &EvaluateArgs, prep: &Prepared) -> Result<(ForecastReport, Vec<(usize, ArimaModel)>)> {
    let target_cells = || prep.datasets(DatasetOptions::default()).map(|(_, t)| t);
    match (a.arch, &a.checkpoint) {
        (Some(ArchArg::Naive), _) => {
            let clock = Instant::now();
            let f = naive_forecast(&prep.counts)?;
            let mut r = eval::evaluate_hourly("naive", serde_json::json!({}), &f, &target_cells()?)?;
            r.pred_ms = clock.elapsed().as_secs_f64() * 1e3 / f.len().max(1) as f64;
            Ok((r, vec![]))
        }
        (Some(ArchArg::Arima), _) => {
            let max = parse_max_order(&a.arima_max)?;
            let refit = (a.refit_every > 0).then_some(a.refit_every);
            let clock = Instant::now();
            let (f, models) = arima_forecasts(&prep.counts, prep.split_index(), max, refit, FitOptions::default())?;
            let config = serde_json::json!({ "max_order": max, "refit_every": a.refit_every });
            let mut r = eval::evaluate_hourly("arima", config, &f, &target_cells()?)?;
            r.pred_ms = clock.elapsed().as_secs_f64() * 1e3 / f.len().max(1) as f64;
            Ok((r, models))
        }
        (arch, Some(path)) => {
            let ck = Checkpoint::load(path)?;
            if let Some(want) = arch.and_then(ArchArg::recurrent) {
                if want != ck.arch {
                    return Err(Error::Checkpoint(format!("checkpoint holds {}, not {}", ck.arch.tag(), want.tag())));
                }
            }
            let model = ck.to_model(Some(&prep.graph))?;
            let (_, test) = prep.datasets(ck.dataset)?;
            if *test.scalers != ck.scalers {
                return Err(Error::Checkpoint("dataset scalers differ from the checkpoint's".into()));
            }
            let config = serde_json::json!({ "train": ck.train, "dataset": ck.dataset, "dt": ck.dt, "forcing": ck.forcing });
            let mut r = eval::evaluate_model(&model, &test, ck.arch.tag(), config)?;
            r.train_minutes = train_minutes_near(path);
            Ok((r, vec![]))
        }
        (_, None) => Err(Error::Invalid("evaluate needs --checkpoint or --arch naive|arima".into())),
    }
}

pub fn cmd_evaluate(a: &EvaluateArgs) -> Result<()> {
    let prep = Prepared::load(&a.data)?;
    let (report, arima_models) = evaluate_report(a, &prep)?;
    create_dir(&a.out)?;
    eval::emit_report(&report, &a.out)?;
    let mut artifacts: Vec<String> = vec!["metrics.json".into(), "metrics.csv".into()];
    artifacts.extend((0..report.per_poi.len()).map(|k| format!("traces/poi_{k}.csv")));
    if !arima_models.is_empty() {
        arima::write_coefficients(&a.out.join("arima.csv"), &arima_models)?;
        artifacts.push("arima.csv".into());
    }
    let mut m = RunManifest::new("evaluate", report.config.clone(), None);
    prep.record_inputs(&mut m)?;
    if let Some(c) = &a.checkpoint {
        m.input(c)?;
    }
    m.artifacts = artifacts;
    m.write(&a.out, "manifest.json")
}

/// Free-running forecast of `horizon` hours after the last observation.
///
/// The model first reads the final `seq_len` observed hours, then feeds its own scaled
/// predictions back as visitor inputs. Future calendar features are computed exactly;
/// weather and ping inputs hold their last observed values and zero respectively.
pub fn forecast(ck: &Checkpoint, prep: &Prepared, horizon: usize) -> Result<Vec<(Timestamp, Vec<f64>)>> {
    let model = ck.to_model(Some(&prep.graph))?;
    let opts = ck.dataset;
    let (train_ds, _) = prep.datasets(opts)?;
    let scalers = &train_ds.scalers;
    let n = prep.counts.len();
    if n < opts.seq_len {
        return Err(Error::TooShort { need: opts.seq_len, got: n });
    }
    let encoder = prep.encoder();
    let last_features = prep.features.series.row(n - 1).to_vec();
    let scale_features = |row: &[f64]| -> Vec<f64> {
        row.iter().enumerate().map(|(c, &v)| scalers.features.scale_value(c, v)).collect()
    };
    let features_at = |t: usize| -> Result<Vec<f64>> {
        if t < n {
            return Ok(scale_features(prep.features.series.row(t)));
        }
        let ts = prep.counts.timestamp(t);
        let mut row = encoder.encode(&ts)?.to_vec();
        row.extend_from_slice(&last_features[row.len()..]);
        Ok(scale_features(&row))
    };
    let scaled_pings = |t: usize| -> Vec<f64> {
        let s = scalers.pings.as_ref();
        (0..prep.node_counts.width())
            .map(|c| match (s, t < n) {
                (Some(s), true) => s.scale_value(c, prep.node_counts.get(t, c)),
                _ => 0.0,
            })
            .collect()
    };
    let use_features = opts.inputs != InputSet::Visitors;
    let poi_nodes = prep.graph.poi_nodes();
    let first = n - opts.seq_len;
    let mut counts_scaled: Vec<Vec<f64>> = (first..n).map(|t| scalers.scale_counts(prep.counts.row(t))).collect();
    let mut seq = Sequence::default();
    let push_step = |seq: &mut Sequence, t: usize, counts: &[f64]| -> Result<()> {
        let mut x = counts.to_vec();
        if use_features {
            x.extend(features_at(t)?);
        }
        if !opts.graph && opts.inputs == InputSet::Geo {
            x.extend(scaled_pings(t));
        }
        seq.inputs.push(x);
        if opts.graph {
            let mut obs = scaled_pings(t);
            for (k, &node) in poi_nodes.iter().enumerate() {
                obs[node] = counts[k];
            }
            seq.observations.push(obs);
        }
        Ok(())
    };
    for (i, t) in (first..n).enumerate() {
        push_step(&mut seq, t, &counts_scaled[i].clone())?;
    }
    let mut out = Vec::with_capacity(horizon);
    for h in 0..horizon {
        let t = n + h;
        // the last input step's observation slot needs the step after it
        let mut probe = seq.clone();
        if opts.graph {
            let placeholder = seq.observations.last().cloned().unwrap_or_default();
            probe.observations.push(placeholder);
        }
        let trace = model.forward(&probe, None)?;
        let p = model.output_size;
        let pred_scaled = trace.preds[trace.preds.len() - p..].to_vec();
        let pred_counts = scalers.to_counts(&pred_scaled);
        out.push((prep.counts.timestamp(t), pred_counts));
        let fed = scalers.scale_counts(&out.last().unwrap().1);
        counts_scaled.push(fed.clone());
        push_step(&mut seq, t, &fed)?;
    }
    Ok(out)
}

pub fn cmd_forecast(a: &ForecastArgs) -> Result<()> {
    let prep = Prepared::load(&a.data)?;
    let ck = Checkpoint::load(&a.checkpoint)?;
    let rows = forecast(&ck, &prep, a.horizon)?;
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    let mut w = csv::Writer::from_path(&a.out).map_err(|e| crate::series::csv_io(&a.out, e))?;
    w.write_record(["timestamp", "poi_id", "pred"]).map_err(|e| crate::series::csv_io(&a.out, e))?;
    for (ts, preds) in &rows {
        for (k, v) in preds.iter().enumerate() {
            w.write_record([format_timestamp(ts), k.to_string(), v.to_string()])
                .map_err(|e| crate::series::csv_io(&a.out, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(&a.out, e))?;
    let mut m = RunManifest::new("forecast", serde_json::json!({ "horizon": a.horizon }), None);
    prep.record_inputs(&mut m)?;
    m.input(&a.checkpoint)?;
    m.artifacts = vec![a.out.display().to_string()];
    let dir = a.out.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let stem = a.out.file_stem().and_then(|s| s.to_str()).unwrap_or("forecast");
    m.write(dir, &format!("{stem}.manifest.json"))
}

/// Hour after the last observation, for callers that label forecasts themselves.
pub fn forecast_origin(prep: &Prepared) -> Timestamp {
    prep.counts.start + Duration::hours(prep.counts.len() as i64)
}
