//! Batch experiment runner behind the `fqcnn` binary.
//!
//! Every command writes into `--out` and archives its effective settings as
//! `config.json`; that file can be passed back with `--config` to rerun.
//! Exit codes: 0 success, 2 usage, 3 training divergence, 4 aliasing guard,
//! 5 missing inputs, 1 anything else.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::ansatz::{dof, ModelDescriptor, DEFAULT_LAYOUT_SEED};
use crate::data::{self, make_windows, TimeSeries, WindowedDataset};
use crate::diagnostics::{self, DataPolicy};
use crate::error::Error;
use crate::qconv::{self, ConvConfig, Metrics, QConvModel, TrainConfig};
use crate::spectra;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Parser, Debug)]
#[command(name = "fqcnn", version, about = "Fourier analysis and quantum-convolution forecasting experiments")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct Global {
    /// Master seed.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads (results do not depend on it).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// JSON file whose keys override the flags.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate or ingest a series and write it with a window manifest.
    Data(DataCmd),
    /// Train the forecaster and evaluate it on the test split.
    Train(TrainCmd),
    /// Evaluate a saved checkpoint.
    Eval(EvalCmd),
    /// Sample the Fourier spectrum of a model.
    Spectrum(SpectrumCmd),
    /// Expressibility against the Haar fidelity distribution.
    Express(ExpressCmd),
    /// Variance of a parameter derivative over random weights.
    Variance(VarianceCmd),
    /// Aggregate result files into tables.
    Report(ReportCmd),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetName {
    Legendre,
    Mackey,
    Csv,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyArg {
    Zeros,
    Random,
}

impl From<PolicyArg> for DataPolicy {
    fn from(p: PolicyArg) -> Self {
        match p {
            PolicyArg::Zeros => DataPolicy::Zeros,
            PolicyArg::Random => DataPolicy::Random,
        }
    }
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct DatasetOpts {
    /// Series length (defaults: legendre 1000, mackey 1024).
    #[arg(long)]
    pub points: Option<usize>,
    /// Legendre noise standard deviation.
    #[arg(long, default_value_t = data::LEGENDRE_SIGMA)]
    pub sigma: f64,
    /// Legendre noise seed (defaults to --seed).
    #[arg(long)]
    pub data_seed: Option<u64>,
    /// `date,value` CSV for the csv dataset.
    #[arg(long = "in")]
    pub input: Option<PathBuf>,
    /// Train/test split row (dataset default if omitted).
    #[arg(long)]
    pub split: Option<usize>,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct ModelOpts {
    /// strongly, basic, custom, random or dense.
    #[arg(long, default_value = "strongly")]
    pub ansatz: String,
    /// parallel, super or nonreup.
    #[arg(long, default_value = "super")]
    pub arch: String,
    /// Encoded features per kernel position.
    #[arg(long, default_value_t = 2)]
    pub kernel: usize,
    #[arg(long, default_value_t = 2)]
    pub layers: usize,
    /// Assert the qubit count implied by the other options.
    #[arg(long)]
    pub qubits: Option<usize>,
    /// Layout seed of the random template.
    #[arg(long, default_value_t = DEFAULT_LAYOUT_SEED)]
    pub layout_seed: u64,
}

impl ModelOpts {
    fn descriptor(&self) -> Result<ModelDescriptor, Error> {
        let mut d = ModelDescriptor::new(self.ansatz.parse()?, self.arch.parse()?, self.kernel, self.layers);
        d.seed = self.layout_seed;
        d.validate()?;
        if let Some(q) = self.qubits {
            d.check_qubits(q)?;
        }
        Ok(d)
    }
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct DataCmd {
    #[arg(value_enum)]
    pub dataset: DatasetName,
    #[command(flatten)]
    #[serde(flatten)]
    pub opts: DatasetOpts,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct TrainCmd {
    #[arg(long, value_enum, default_value = "mackey")]
    pub dataset: DatasetName,
    /// Dataset manifest written by `data`; replaces the dataset options.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DatasetOpts,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelOpts,
    #[arg(long, default_value_t = 30)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.01)]
    pub lr: f64,
    #[arg(long, default_value_t = 16)]
    pub batch: usize,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct EvalCmd {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long, value_enum, default_value = "mackey")]
    pub dataset: DatasetName,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DatasetOpts,
    /// Expected ansatz; with --arch/--layers, checked against the checkpoint.
    #[arg(long)]
    pub ansatz: Option<String>,
    #[arg(long)]
    pub arch: Option<String>,
    #[arg(long)]
    pub layers: Option<usize>,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumCmd {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelOpts,
    #[arg(long, default_value_t = spectra::DEFAULT_SAMPLES)]
    pub samples: usize,
    #[arg(long, default_value_t = spectra::DEFAULT_GRID)]
    pub grid: usize,
    #[arg(long, default_value_t = spectra::DEFAULT_THRESHOLD)]
    pub threshold: f64,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct ExpressCmd {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelOpts,
    #[arg(long, default_value_t = diagnostics::DEFAULT_PAIRS)]
    pub pairs: usize,
    #[arg(long, default_value_t = diagnostics::DEFAULT_BINS)]
    pub bins: usize,
    #[arg(long, value_enum, default_value = "zeros")]
    pub data_policy: PolicyArg,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct VarianceCmd {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelOpts,
    #[arg(long, default_value_t = diagnostics::DEFAULT_VARIANCE_SAMPLES)]
    pub samples: usize,
    /// Weight slot to differentiate.
    #[arg(long, default_value_t = diagnostics::DEFAULT_VARIANCE_PARAMETER)]
    pub param: usize,
    #[arg(long, value_enum, default_value = "zeros")]
    pub data_policy: PolicyArg,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct ReportCmd {
    /// Directory searched recursively for result JSON files.
    #[arg(long = "in")]
    pub input: PathBuf,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Missing(String),
    Lib(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Lib(e)
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Missing(m) => write!(f, "missing input: {m}"),
            CliError::Lib(e) => write!(f, "{e}"),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Missing(_) => 5,
            CliError::Lib(e) => match e {
                Error::Training { .. } => 3,
                Error::Aliasing { .. } => 4,
                Error::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => 5,
                Error::Descriptor(_)
                | Error::DescriptorMismatch(_)
                | Error::Domain(_)
                | Error::Range(_)
                | Error::Arity { .. }
                | Error::Size(_)
                | Error::Index(_)
                | Error::Parse { .. }
                | Error::Json(_) => 2,
                _ => 1,
            },
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Parse `args` (including the program name), run, and return the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: Cli) -> CliResult<()> {
    let Cli { global, command } = cli;
    match command {
        Command::Data(a) => dispatch("data", global, a, cmd_data),
        Command::Train(a) => dispatch("train", global, a, cmd_train),
        Command::Eval(a) => dispatch("eval", global, a, cmd_eval),
        Command::Spectrum(a) => dispatch("spectrum", global, a, cmd_spectrum),
        Command::Express(a) => dispatch("express", global, a, cmd_express),
        Command::Variance(a) => dispatch("variance", global, a, cmd_variance),
        Command::Report(a) => dispatch("report", global, a, cmd_report),
    }
}

/// Settings a command sees after the config overlay.
struct Ctx {
    seed: u64,
    out: PathBuf,
    /// Archived settings: everything except output location and thread count.
    config: Value,
}

fn dispatch<A, F>(name: &str, global: Global, args: A, f: F) -> CliResult<()>
where
    A: Serialize + DeserializeOwned,
    F: FnOnce(&Ctx, A) -> CliResult<()> + Send,
    A: Send,
{
    let config_path = global.config.clone();
    let mut merged = to_object(&global)?;
    merged.extend(to_object(&args)?);
    if let Some(path) = &config_path {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let overlay: Value = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.clone(),
            line: e.line(),
            msg: e.to_string(),
        })?;
        let Value::Object(overlay) = overlay else {
            return Err(CliError::Usage(format!("{} must hold a JSON object", path.display())));
        };
        for (k, v) in overlay {
            match k.as_str() {
                "command" | "format_version" => {}
                _ if merged.contains_key(&k) => {
                    merged.insert(k, v);
                }
                _ => return Err(CliError::Usage(format!("unknown config key '{k}' for {name}"))),
            }
        }
    }
    let global: Global = from_object(&merged)?;
    let args: A = from_object(&merged)?;
    let mut archived = merged.clone();
    archived.remove("out");
    archived.remove("threads");
    archived.insert("command".into(), json!(name));
    archived.insert("format_version".into(), json!(FORMAT_VERSION));
    let ctx = Ctx {
        seed: global.seed,
        out: global.out.clone(),
        config: Value::Object(archived),
    };
    std::fs::create_dir_all(&ctx.out).map_err(|e| Error::io(&ctx.out, e))?;
    write_json(&ctx.out.join("config.json"), &ctx.config)?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = global.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    pool.install(|| f(&ctx, args))
}

fn to_object<T: Serialize>(v: &T) -> CliResult<Map<String, Value>> {
    match serde_json::to_value(v).map_err(Error::from)? {
        Value::Object(m) => Ok(m),
        _ => unreachable!("argument structs serialize to objects"),
    }
}

fn from_object<T: DeserializeOwned>(m: &Map<String, Value>) -> CliResult<T> {
    serde_json::from_value(Value::Object(m.clone())).map_err(|e| CliError::Usage(format!("bad config value: {e}")))
}

fn write_json(path: &Path, v: &impl Serialize) -> CliResult<()> {
    let text = serde_json::to_string_pretty(v).map_err(Error::from)?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e).into())
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e).into())
}

fn write_with(path: &Path, f: impl FnOnce(&mut Vec<u8>) -> Result<(), Error>) -> CliResult<()> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    std::fs::write(path, buf).map_err(|e| Error::io(path, e).into())
}

/// Result record: the payload plus kind, seed, config and format version.
fn record(ctx: &Ctx, kind: &str, payload: impl Serialize) -> CliResult<Value> {
    let mut m = to_object(&payload)?;
    m.insert("kind".into(), json!(kind));
    m.insert("seed".into(), json!(ctx.seed));
    m.insert("format_version".into(), json!(FORMAT_VERSION));
    m.insert("config".into(), ctx.config.clone());
    Ok(Value::Object(m))
}

/// Everything needed to rebuild a windowed dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub name: DatasetName,
    pub points: Option<usize>,
    pub sigma: f64,
    pub seed: u64,
    pub input: Option<PathBuf>,
    pub lags: Vec<i64>,
    pub horizon: usize,
    pub split: usize,
}

impl DatasetSpec {
    fn from_opts(name: DatasetName, o: &DatasetOpts, seed: u64) -> Self {
        let (lags, horizon, split) = match name {
            DatasetName::Mackey => (
                data::MACKEY_GLASS_LAGS.to_vec(),
                data::MACKEY_GLASS_HORIZON,
                data::MACKEY_GLASS_SPLIT,
            ),
            DatasetName::Legendre => (data::LEGENDRE_LAGS.to_vec(), 1, data::LEGENDRE_SPLIT),
            DatasetName::Csv => (data::EURO_LAGS.to_vec(), 1, data::EURO_SPLIT),
        };
        Self {
            name,
            points: o.points,
            sigma: o.sigma,
            seed: o.data_seed.unwrap_or(seed),
            input: o.input.clone(),
            lags,
            horizon,
            split: o.split.unwrap_or(split),
        }
    }

    pub fn series(&self) -> CliResult<TimeSeries> {
        Ok(match self.name {
            DatasetName::Legendre => {
                data::gen_legendre(self.points.unwrap_or(data::LEGENDRE_POINTS), self.sigma, self.seed)?
            }
            DatasetName::Mackey => data::gen_mackey_glass(&data::MackeyGlassParams {
                n_points: self.points.unwrap_or(data::MACKEY_GLASS_POINTS),
                ..Default::default()
            })?,
            DatasetName::Csv => {
                let path = self
                    .input
                    .as_ref()
                    .ok_or_else(|| CliError::Usage("the csv dataset needs --in <file>".into()))?;
                data::load_csv(path)?
            }
        })
    }

    pub fn build(&self) -> CliResult<(TimeSeries, WindowedDataset)> {
        let series = self.series()?;
        let ds = make_windows(&series.values, &self.lags, self.horizon, self.split)?;
        Ok((series, ds))
    }
}

fn resolve_dataset(
    name: DatasetName,
    manifest: Option<&Path>,
    opts: &DatasetOpts,
    seed: u64,
) -> CliResult<DatasetSpec> {
    match manifest {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let v: Value = serde_json::from_str(&text).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: e.line(),
                msg: e.to_string(),
            })?;
            let spec = v
                .get("spec")
                .ok_or_else(|| CliError::Usage(format!("{} has no dataset spec", path.display())))?;
            serde_json::from_value(spec.clone())
                .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
        }
        None => Ok(DatasetSpec::from_opts(name, opts, seed)),
    }
}

fn cmd_data(ctx: &Ctx, a: DataCmd) -> CliResult<()> {
    let spec = DatasetSpec::from_opts(a.dataset, &a.opts, ctx.seed);
    let (series, ds) = spec.build()?;
    write_with(&ctx.out.join("series.csv"), |b| series.write_csv(b))?;
    let manifest = record(
        ctx,
        "dataset",
        json!({
            "spec": spec,
            "series_file": "series.csv",
            "n_points": series.len(),
            "rows": ds.len(),
            "train_rows": ds.split_index,
            "test_rows": ds.len() - ds.split_index,
            "origin": series.origin,
        }),
    )?;
    write_json(&ctx.out.join("dataset.json"), &manifest)?;
    println!("{} points, {} windows -> {}", series.len(), ds.len(), ctx.out.display());
    Ok(())
}

#[derive(Serialize)]
struct MetricsOut {
    rmse: f64,
    mae: f64,
    mape: Option<f64>,
}

impl From<Metrics> for MetricsOut {
    fn from(m: Metrics) -> Self {
        Self {
            rmse: m.rmse,
            mae: m.mae,
            mape: m.mape,
        }
    }
}

fn cmd_train(ctx: &Ctx, a: TrainCmd) -> CliResult<()> {
    let spec = resolve_dataset(a.dataset, a.manifest.as_deref(), &a.data, ctx.seed)?;
    let (_, ds) = spec.build()?;
    let desc = a.model.descriptor()?;
    let conv = ConvConfig::new(ds.window(), desc)?;
    let model = QConvModel::new(conv, ds.fit_scaler()?, ctx.seed)?;
    let cfg = TrainConfig {
        epochs: a.epochs,
        learning_rate: a.lr,
        batch_size: a.batch,
        seed: ctx.seed,
        ..Default::default()
    };
    let start = Instant::now();
    let outcome = qconv::train(model, &ds, &cfg)?;
    let wall = start.elapsed().as_secs_f64();
    let (xt, yt) = ds.test();
    let (xr, yr) = ds.train();
    let preds = outcome.model.predict(xt)?;
    let test = Metrics::compute(&preds, yt)?;
    let train = qconv::evaluate(&outcome.model, xr, yr)?;
    outcome.model.save(ctx.out.join("model.json"))?;
    write_with(&ctx.out.join("history.csv"), |b| outcome.write_history_csv(b))?;
    write_text(&ctx.out.join("predictions.svg"), &prediction_svg(yt, &preds, &desc))?;
    let m = MetricsOut::from(test);
    let rec = record(
        ctx,
        "train",
        json!({
            "dataset": spec.name,
            "descriptor": desc,
            "n_qubits": desc.n_qubits(),
            "trainable_parameters": desc.n_weights(),
            "epochs": cfg.epochs,
            "train_config": cfg,
            "best_epoch": outcome.best_epoch,
            "rmse": m.rmse,
            "mae": m.mae,
            "mape": m.mape,
            "train_metrics": MetricsOut::from(train),
            "persistence": MetricsOut::from(qconv::persistence_metrics(&ds)?),
            "wall_seconds": wall,
        }),
    )?;
    write_json(&ctx.out.join("metrics.json"), &rec)?;
    println!("test rmse {:.5} mae {:.5} ({:.1}s)", test.rmse, test.mae, wall);
    Ok(())
}

fn cmd_eval(ctx: &Ctx, a: EvalCmd) -> CliResult<()> {
    let model = if a.ansatz.is_some() || a.arch.is_some() || a.layers.is_some() {
        let opts = ModelOpts {
            ansatz: a.ansatz.clone().unwrap_or_else(|| "strongly".into()),
            arch: a.arch.clone().unwrap_or_else(|| "super".into()),
            kernel: 2,
            layers: a.layers.unwrap_or(2),
            qubits: None,
            layout_seed: DEFAULT_LAYOUT_SEED,
        };
        QConvModel::load_for(&a.checkpoint, &opts.descriptor()?)?
    } else {
        QConvModel::load(&a.checkpoint)?
    };
    let spec = resolve_dataset(a.dataset, a.manifest.as_deref(), &a.data, ctx.seed)?;
    let (_, ds) = spec.build()?;
    if ds.window() != model.conv.c {
        return Err(Error::DescriptorMismatch(format!(
            "checkpoint expects {} lags, dataset has {}",
            model.conv.c,
            ds.window()
        ))
        .into());
    }
    let start = Instant::now();
    let (xt, yt) = ds.test();
    let preds = model.predict(xt)?;
    let m = MetricsOut::from(Metrics::compute(&preds, yt)?);
    let wall = start.elapsed().as_secs_f64();
    let desc = model.conv.descriptor;
    write_text(&ctx.out.join("predictions.svg"), &prediction_svg(yt, &preds, &desc))?;
    let rec = record(
        ctx,
        "eval",
        json!({
            "dataset": spec.name,
            "descriptor": desc,
            "n_qubits": desc.n_qubits(),
            "rmse": m.rmse,
            "mae": m.mae,
            "mape": m.mape,
            "persistence": MetricsOut::from(qconv::persistence_metrics(&ds)?),
            "wall_seconds": wall,
        }),
    )?;
    write_json(&ctx.out.join("eval.json"), &rec)?;
    println!("test rmse {:.5} mae {:.5}", m.rmse, m.mae);
    Ok(())
}

fn cmd_spectrum(ctx: &Ctx, a: SpectrumCmd) -> CliResult<()> {
    let desc = a.model.descriptor()?;
    let report = spectra::sample_spectrum(&desc, a.samples, ctx.seed, a.grid, a.threshold)?;
    let rec = record(ctx, "spectrum", report.summary())?;
    write_json(&ctx.out.join("spectrum.json"), &rec)?;
    write_with(&ctx.out.join("spectrum.csv"), |b| report.write_csv(b))?;
    write_text(&ctx.out.join("spectrum.svg"), &report.to_svg())?;
    println!("degree {} with {} accessible frequencies", report.degree, report.accessible.len());
    Ok(())
}

fn cmd_express(ctx: &Ctx, a: ExpressCmd) -> CliResult<()> {
    let desc = a.model.descriptor()?;
    let res = diagnostics::expressibility(&desc, a.pairs, a.bins, ctx.seed, a.data_policy.into())?;
    let dim = 1u64 << desc.n_qubits();
    write_with(&ctx.out.join("express_histogram.csv"), |b| res.histogram.write_csv(b, dim))?;
    write_json(&ctx.out.join("express.json"), &record(ctx, "express", &res)?)?;
    println!("KL {:.6} (upper bound {:.3})", res.kl, res.upper_bound);
    Ok(())
}

fn cmd_variance(ctx: &Ctx, a: VarianceCmd) -> CliResult<()> {
    let desc = a.model.descriptor()?;
    let res = diagnostics::gradient_variance(&desc, a.samples, ctx.seed, a.param, a.data_policy.into())?;
    write_json(&ctx.out.join("variance.json"), &record(ctx, "variance", &res)?)?;
    println!("variance {:.6e}", res.variance);
    Ok(())
}

/// Test-split prediction against truth as a self-contained line chart.
pub fn prediction_svg(truth: &[f64], pred: &[f64], desc: &ModelDescriptor) -> String {
    let (w, h, pad) = (720.0, 300.0, 40.0);
    let lo = truth.iter().chain(pred).copied().fold(f64::INFINITY, f64::min);
    let hi = truth.iter().chain(pred).copied().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let n = truth.len().max(2) as f64 - 1.0;
    let path = |ys: &[f64]| {
        let mut s = String::new();
        for (i, y) in ys.iter().enumerate() {
            let x = pad + i as f64 / n * (w - 2.0 * pad);
            let yy = h - pad - (y - lo) / span * (h - 2.0 * pad);
            let _ = write!(s, "{}{x:.2},{yy:.2} ", if i == 0 { "M" } else { "L" });
        }
        s
    };
    format!(
        concat!(
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="11">"#,
            "\n",
            r##"<rect x="{pad}" y="{pad}" width="{iw}" height="{ih}" fill="none" stroke="#ccc"/>"##,
            "\n",
            r#"<text x="{pad}" y="20" font-size="13">{a} / {arch} / M={m} L={l}: test split</text>"#,
            "\n",
            r##"<path d="{pt}" fill="none" stroke="#333" stroke-width="1.2"/>"##,
            "\n",
            r##"<path d="{pp}" fill="none" stroke="#d62728" stroke-width="1.2"/>"##,
            "\n",
            r##"<text x="{lx}" y="20" fill="#333">truth</text><text x="{lx2}" y="20" fill="#d62728">prediction</text>"##,
            "\n</svg>\n"
        ),
        w = w,
        h = h,
        pad = pad,
        iw = w - 2.0 * pad,
        ih = h - 2.0 * pad,
        a = desc.ansatz,
        arch = desc.architecture,
        m = desc.kernel,
        l = desc.layers,
        pt = path(truth).trim_end(),
        pp = path(pred).trim_end(),
        lx = w - 160.0,
        lx2 = w - 110.0,
    )
}

fn collect_json(dir: &Path, out: &mut Vec<PathBuf>) -> CliResult<()> {
    let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .collect();
    entries.sort();
    for p in entries {
        if p.is_dir() {
            collect_json(&p, out)?;
        } else if p.extension().is_some_and(|e| e == "json") {
            out.push(p);
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
struct ModelKey {
    ansatz: String,
    arch: String,
    kernel: usize,
    layers: usize,
    qubits: usize,
}

impl ModelKey {
    fn of(d: &ModelDescriptor) -> Self {
        Self {
            ansatz: d.ansatz.name().into(),
            arch: d.architecture.name().into(),
            kernel: d.kernel,
            layers: d.layers,
            qubits: d.n_qubits(),
        }
    }
}

#[derive(Default)]
struct Acc {
    rmse: Vec<f64>,
    mae: Vec<f64>,
    mape: Vec<f64>,
    secs: Vec<f64>,
    params: usize,
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

/// Relative improvement of `better` over `base`, in percent.
fn improvement(base: Option<f64>, better: Option<f64>) -> Option<f64> {
    match (base, better) {
        (Some(b), Some(n)) if b != 0.0 => Some((b - n) / b * 100.0),
        _ => None,
    }
}

fn csv_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 table")
}

fn cmd_report(ctx: &Ctx, a: ReportCmd) -> CliResult<()> {
    if !a.input.is_dir() {
        return Err(CliError::Missing(format!("result directory {}", a.input.display())));
    }
    let mut files = Vec::new();
    collect_json(&a.input, &mut files)?;
    let mut forecast: BTreeMap<(String, ModelKey), Acc> = BTreeMap::new();
    let mut degree: BTreeMap<ModelKey, (usize, Option<usize>, usize)> = BTreeMap::new();
    let mut kl: BTreeMap<ModelKey, f64> = BTreeMap::new();
    let mut var: BTreeMap<ModelKey, f64> = BTreeMap::new();
    let mut used = Vec::new();
    for path in &files {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let Ok(v) = serde_json::from_str::<Value>(&text) else {
            continue;
        };
        let Some(kind) = v.get("kind").and_then(Value::as_str) else {
            continue;
        };
        let Some(desc) = v
            .get("descriptor")
            .and_then(|d| serde_json::from_value::<ModelDescriptor>(d.clone()).ok())
        else {
            continue;
        };
        let key = ModelKey::of(&desc);
        let f = |name: &str| v.get(name).and_then(Value::as_f64);
        match kind {
            "train" => {
                let dataset = v.get("dataset").and_then(Value::as_str).unwrap_or("unknown").to_string();
                let acc = forecast.entry((dataset, key)).or_default();
                acc.rmse.extend(f("rmse"));
                acc.mae.extend(f("mae"));
                acc.mape.extend(f("mape"));
                acc.secs.extend(f("wall_seconds"));
                acc.params = desc.n_weights();
            }
            "spectrum" => {
                let d = v.get("degree").and_then(Value::as_u64).unwrap_or(0) as usize;
                let e = v.get("expected_degree").and_then(Value::as_u64).map(|x| x as usize);
                degree.insert(key, (d, e, desc.n_weights()));
            }
            "express" => {
                kl.extend(f("kl").map(|x| (key, x)));
            }
            "variance" => {
                var.extend(f("variance").map(|x| (key, x)));
            }
            _ => continue,
        }
        used.push(path.strip_prefix(&a.input).unwrap_or(path).display().to_string());
    }
    if used.is_empty() {
        return Err(CliError::Missing(format!(
            "no train, spectrum, express or variance results under {}",
            a.input.display()
        )));
    }

    let mut rows = Vec::new();
    for ((dataset, k), acc) in &forecast {
        rows.push(vec![
            dataset.clone(),
            k.ansatz.clone(),
            k.arch.clone(),
            k.qubits.to_string(),
            k.layers.to_string(),
            acc.params.to_string(),
            acc.rmse.len().to_string(),
            fmt_opt(mean(&acc.rmse)),
            fmt_opt(mean(&acc.mae)),
            fmt_opt(mean(&acc.mape)),
            fmt_opt(mean(&acc.secs)),
        ]);
    }
    let forecast_csv = csv_table(
        &["dataset", "ansatz", "architecture", "qubits", "layers", "parameters", "runs", "rmse", "mae", "mape", "training_seconds"],
        &rows,
    );

    let lookup = |dataset: &str, ansatz: &str, arch: &str, kernel: usize, layers: usize| {
        forecast.iter().find_map(|((d, k), acc)| {
            (d == dataset && k.ansatz == ansatz && k.arch == arch && k.kernel == kernel && k.layers == layers)
                .then_some(acc)
        })
    };
    let compare = |base: &Acc, new: &Acc| {
        vec![
            fmt_opt(improvement(mean(&base.rmse), mean(&new.rmse))),
            fmt_opt(improvement(mean(&base.mae), mean(&new.mae))),
            fmt_opt(improvement(mean(&base.mape), mean(&new.mape))),
        ]
    };
    // reuploading: parallel against nonreup at equal kernel and layers
    let mut reup = Vec::new();
    // super-parallel at L against parallel at L^2, which has the same expected degree
    let mut sup = Vec::new();
    for ((dataset, k), acc) in &forecast {
        if k.arch == "parallel" {
            if let Some(base) = lookup(dataset, &k.ansatz, "nonreup", k.kernel, k.layers) {
                let mut r = vec![dataset.clone(), k.ansatz.clone(), k.qubits.to_string(), k.layers.to_string()];
                r.extend([fmt_opt(mean(&acc.rmse)), fmt_opt(mean(&base.rmse))]);
                r.extend(compare(base, acc));
                reup.push(r);
            }
        }
        if k.arch == "super" {
            if let Some(base) = lookup(dataset, &k.ansatz, "parallel", k.kernel, k.layers * k.layers) {
                let mut r = vec![
                    dataset.clone(),
                    k.ansatz.clone(),
                    k.qubits.to_string(),
                    k.layers.to_string(),
                    k.kernel.to_string(),
                    (k.layers * k.layers).to_string(),
                ];
                r.extend([fmt_opt(mean(&acc.rmse)), fmt_opt(mean(&base.rmse))]);
                r.extend(compare(base, acc));
                sup.push(r);
            }
        }
    }
    let reup_csv = csv_table(
        &["dataset", "ansatz", "qubits", "layers", "rmse_reuploading", "rmse_single_upload", "rmse_improvement_pct", "mae_improvement_pct", "mape_improvement_pct"],
        &reup,
    );
    let sup_csv = csv_table(
        &["dataset", "ansatz", "super_qubits", "super_layers", "parallel_qubits", "parallel_layers", "rmse_super", "rmse_parallel", "rmse_improvement_pct", "mae_improvement_pct", "mape_improvement_pct"],
        &sup,
    );

    let dof_rows: Vec<Vec<String>> = degree
        .iter()
        .map(|(k, &(d, e, p))| {
            let features_dof = |deg: Option<usize>| {
                deg.and_then(|deg| dof(deg as u32, k.kernel as u32).ok())
                    .map(|v| v.to_string())
                    .unwrap_or_default()
            };
            vec![
                k.ansatz.clone(),
                k.arch.clone(),
                k.qubits.to_string(),
                k.layers.to_string(),
                p.to_string(),
                e.map(|e| e.to_string()).unwrap_or_default(),
                features_dof(e),
                d.to_string(),
                features_dof(Some(d)),
            ]
        })
        .collect();
    let dof_csv = csv_table(
        &["ansatz", "architecture", "qubits", "layers", "trainable_parameters", "expected_degree", "parameters_needed_expected", "obtained_degree", "parameters_needed_obtained"],
        &dof_rows,
    );

    let mut keys: Vec<&ModelKey> = degree.keys().chain(kl.keys()).chain(var.keys()).collect();
    keys.sort();
    keys.dedup();
    let diag_rows: Vec<Vec<String>> = keys
        .iter()
        .map(|k| {
            vec![
                k.ansatz.clone(),
                k.arch.clone(),
                k.qubits.to_string(),
                k.layers.to_string(),
                degree.get(*k).map(|d| d.0.to_string()).unwrap_or_default(),
                kl.get(*k).map(|v| format!("{v:.6}")).unwrap_or_default(),
                var.get(*k).map(|v| format!("{v:.6}")).unwrap_or_default(),
            ]
        })
        .collect();
    let diag_csv = csv_table(
        &["ansatz", "architecture", "qubits", "layers", "obtained_degree", "expressibility", "derivative_variance"],
        &diag_rows,
    );

    let mut written = Vec::new();
    for (name, body, n) in [
        ("report_forecast.csv", &forecast_csv, rows.len()),
        ("report_reuploading.csv", &reup_csv, reup.len()),
        ("report_superparallel.csv", &sup_csv, sup.len()),
        ("report_dof.csv", &dof_csv, dof_rows.len()),
        ("report_diagnostics.csv", &diag_csv, diag_rows.len()),
    ] {
        if n > 0 {
            write_text(&ctx.out.join(name), body)?;
            written.push(name);
        }
    }
    let mut by_dataset: BTreeMap<&str, Vec<Value>> = BTreeMap::new();
    for ((dataset, k), acc) in &forecast {
        by_dataset.entry(dataset).or_default().push(json!({
            "ansatz": k.ansatz, "architecture": k.arch, "qubits": k.qubits, "layers": k.layers,
            "runs": acc.rmse.len(), "rmse": mean(&acc.rmse), "mae": mean(&acc.mae), "mape": mean(&acc.mape),
        }));
    }
    let summary = record(
        ctx,
        "report",
        json!({ "inputs": used, "tables": written, "forecast_by_dataset": by_dataset }),
    )?;
    write_json(&ctx.out.join("report.json"), &summary)?;
    println!("{} inputs -> {}", used.len(), written.join(", "));
    Ok(())
}
