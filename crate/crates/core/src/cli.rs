//! Command-line front end: CSV ingestion and the `fit`, `predict`, `interval`
//! and `benchmark` verbs.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use rand::Rng;
use serde::Serialize;

use crate::bandwidth::{Bandwidth, Strategy};
use crate::bench::{self, emit_table, ExperimentFile, TableFormat, PRESETS};
use crate::error::Error;
use crate::estimator::TruncationBounds;
use crate::forecast::{fit_sample, ppi_predict, qpi_predict, ForecastConfig, Loss, PpiSettings, PredictionResult};
use crate::kernel::Kernel;
use crate::residuals::ResidualKind;
use crate::rng::substream;
use crate::series::{mean, sample_sd, TimeSeries};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Failure of a CLI run, each class with its own exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("file not found: {0}")]
    FileNotFound(PathBuf),
    #[error("parse error at row {0}")]
    ParseError(usize),
    #[error("input file has no data rows")]
    EmptyFile,
    #[error("data error: {0}")]
    Data(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::FileNotFound(_) | CliError::ParseError(_) | CliError::EmptyFile | CliError::Data(_) => EXIT_DATA,
            CliError::Io(_) => EXIT_DATA,
            CliError::Numerical(_) => EXIT_NUMERICAL,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter(_) | Error::Config(_) => CliError::Usage(e.to_string()),
            Error::EmptySample | Error::SampleTooShort { .. } => CliError::Data(e.to_string()),
            Error::ZeroDenominator { .. }
            | Error::DegenerateSample
            | Error::EmptyDistribution
            | Error::LengthMismatch { .. } => CliError::Numerical(e.to_string()),
        }
    }
}

/// Reads one numeric column. A non-numeric first row is taken as a header;
/// blank lines are ignored. Rows are numbered from 1.
pub fn ingest_csv(path: &Path) -> Result<TimeSeries, CliError> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Err(CliError::FileNotFound(path.to_path_buf())),
        Err(e) => return Err(e.into()),
    };
    parse_csv(&text)
}

pub fn parse_csv(text: &str) -> Result<TimeSeries, CliError> {
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    let mut values = Vec::new();
    let mut seen_row = false;
    for (i, line) in text.lines().enumerate() {
        let row = i + 1;
        let field = line.trim_end_matches('\r').trim();
        if field.is_empty() {
            continue;
        }
        let first = !seen_row;
        seen_row = true;
        match field.parse::<f64>() {
            Ok(v) if v.is_finite() => values.push(v),
            Ok(_) => return Err(CliError::ParseError(row)),
            Err(_) if first => {}
            Err(_) => return Err(CliError::ParseError(row)),
        }
    }
    if values.is_empty() {
        return Err(CliError::EmptyFile);
    }
    Ok(TimeSeries::new(values))
}

fn preset_help() -> String {
    let mut s = String::from("Benchmark presets (desk scale N=500; --full-scale uses N=5000):\n");
    for (name, about) in PRESETS {
        let _ = writeln!(s, "  {name:<13} {about}");
    }
    s.push_str("\nExit codes: 0 ok, 1 usage error, 2 data error, 3 numerical failure.");
    s
}

#[derive(Debug, Parser)]
#[command(name = "nwboot", version, about = "Bootstrap forecasts and prediction intervals for nonparametric autoregressions")]
pub struct Cli {
    /// Maximum worker threads; results do not depend on it [default: all cores]
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub verb: Verb,
}

#[derive(Debug, Subcommand)]
pub enum Verb {
    /// Select the bandwidth and fit the mean and volatility estimators
    Fit(FitArgs),
    /// Bootstrap point predictions for horizons 1..=k
    Predict(PredictArgs),
    /// Point predictions with quantile (and, given -B, pertinent) intervals
    Interval(IntervalArgs),
    /// Run a Monte-Carlo preset or experiment file
    Benchmark(BenchArgs),
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Series as CSV, one value per row with optional header
    #[arg(short, long)]
    pub input: PathBuf,
    /// Residuals that feed the bootstrap: fitted or predictive
    #[arg(long, default_value = "fitted")]
    pub residuals: ResidualKind,
    /// Bandwidth strategy: B1 (under-smoothing), B2 (over-smoothed generation), opv
    #[arg(long, default_value = "B2")]
    pub strategy: Strategy,
    /// Use one constant variance instead of a volatility function
    #[arg(long)]
    pub homoscedastic: bool,
    /// Kernel: epanechnikov or gaussian
    #[arg(long, default_value = "epanechnikov", value_parser = parse_kernel)]
    pub kernel: Kernel,
    /// Skip cross-validation and use this h_op
    #[arg(long)]
    pub h_op: Option<f64>,
    /// Output format: json, csv or markdown
    #[arg(long, default_value = "json")]
    pub format: TableFormat,
    /// Write output here instead of stdout
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Largest horizon
    #[arg(short, long)]
    pub k: usize,
    /// Bootstrap paths
    #[arg(short = 'M', long = "paths", default_value_t = 1000)]
    pub m: usize,
    /// RNG seed [default: drawn from entropy and reported on stderr]
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct IntervalArgs {
    #[command(flatten)]
    pub predict: PredictArgs,
    /// Nominal miscoverage level
    #[arg(short, long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Outer bootstrap replicates; enables the pertinent interval
    #[arg(short = 'B', long = "replicates")]
    pub b: Option<usize>,
    /// Paths per point prediction inside the pertinent bootstrap
    #[arg(long, default_value_t = 100)]
    pub ppi_paths: usize,
    /// Loss whose point prediction centres the pertinent interval: l2 or l1
    #[arg(long, default_value = "l2", value_parser = parse_loss)]
    pub center: Loss,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Named preset (see list below)
    #[arg(long, conflicts_with = "config", required_unless_present = "config")]
    pub preset: Option<String>,
    /// TOML experiment file (dgp, T, N, M, B, alpha, methods, seed, ...)
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override the replication count
    #[arg(short = 'n', long = "n")]
    pub n: Option<usize>,
    /// Use the published replication count (N=5000)
    #[arg(long)]
    pub full_scale: bool,
    /// Override the seed
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output format: markdown, csv or json
    #[arg(long, default_value = "markdown")]
    pub format: TableFormat,
    /// Write output here instead of stdout
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

fn parse_kernel(s: &str) -> Result<Kernel, String> {
    match s.to_ascii_lowercase().as_str() {
        "epanechnikov" | "epa" => Ok(Kernel::Epanechnikov),
        "gaussian" | "normal" => Ok(Kernel::Gaussian),
        other => Err(format!("unknown kernel '{other}'")),
    }
}

fn parse_loss(s: &str) -> Result<Loss, String> {
    match s.to_ascii_lowercase().as_str() {
        "l2" => Ok(Loss::L2),
        "l1" => Ok(Loss::L1),
        other => Err(format!("unknown loss '{other}'")),
    }
}

/// Parses `args` (program name first), runs the verb and returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let command = Cli::command().after_help(preset_help());
    let cli = match command.try_get_matches_from(args).and_then(|m| Cli::from_arg_matches(&m)) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{}", e.render());
                    EXIT_OK
                }
                _ => {
                    let _ = write!(stderr, "{}", e.render());
                    EXIT_USAGE
                }
            };
        }
    };
    match dispatch(cli, stdout, stderr) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

pub fn dispatch(cli: Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<(), CliError> {
    if cli.threads == Some(0) {
        return Err(CliError::Usage("--threads must be at least 1".into()));
    }
    let threads = cli.threads;
    match cli.verb {
        Verb::Benchmark(args) => benchmark(args, threads, stdout, stderr),
        verb => {
            let seed = match &verb {
                Verb::Predict(a) => resolve_seed(a.seed, stderr),
                Verb::Interval(a) => resolve_seed(a.predict.seed, stderr),
                _ => 0,
            };
            let work = move || match verb {
                Verb::Fit(args) => fit(args),
                Verb::Predict(args) => predict(args, seed),
                Verb::Interval(args) => interval(args, seed),
                Verb::Benchmark(_) => unreachable!(),
            };
            let (text, output) = match threads {
                Some(n) => rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build()
                    .map_err(|e| CliError::Usage(e.to_string()))?
                    .install(work),
                None => work(),
            }?;
            emit(&output, &text, stdout)
        }
    }
}

fn forecast_config(m: &ModelArgs) -> Result<ForecastConfig, CliError> {
    if let Some(h) = m.h_op {
        if !(h > 0.0 && h.is_finite()) {
            return Err(CliError::Usage(format!("--h-op must be positive, got {h}")));
        }
    }
    Ok(ForecastConfig {
        kernel: m.kernel,
        strategy: m.strategy,
        residuals: m.residuals,
        homoscedastic: m.homoscedastic,
        h_op: m.h_op,
        ..ForecastConfig::default()
    })
}

fn resolve_seed(seed: Option<u64>, stderr: &mut dyn Write) -> u64 {
    seed.unwrap_or_else(|| {
        let s: u64 = rand::rng().random();
        let _ = writeln!(stderr, "seed: {s}");
        s
    })
}

/// Rendered text and where it goes.
type Rendered = (String, Option<PathBuf>);

fn emit(output: &Option<PathBuf>, text: &str, stdout: &mut dyn Write) -> Result<(), CliError> {
    match output {
        Some(path) => fs::write(path, text)?,
        None => stdout.write_all(text.as_bytes())?,
    }
    Ok(())
}

fn fmt_cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// `(header, rows)` rendered as CSV or a markdown table.
fn render_rows(format: TableFormat, header: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = String::new();
    match format {
        TableFormat::Markdown => {
            let _ = writeln!(out, "| {} |", header.join(" | "));
            let _ = writeln!(out, "|{}", "---|".repeat(header.len()));
            for r in rows {
                let _ = writeln!(out, "| {} |", r.join(" | "));
            }
        }
        _ => {
            let _ = writeln!(out, "{}", header.join(","));
            for r in rows {
                let _ = writeln!(out, "{}", r.join(","));
            }
        }
    }
    out
}

#[derive(Debug, Serialize)]
struct ResidualSummary {
    kind: ResidualKind,
    count: usize,
    excluded: usize,
    mean: f64,
    sd: f64,
    min: f64,
    max: f64,
}

#[derive(Debug, Serialize)]
struct FitReport {
    observations: usize,
    h_op: f64,
    bandwidth_fallback: bool,
    bandwidth: Bandwidth,
    g_var: f64,
    bounds: TruncationBounds,
    residuals: ResidualSummary,
}

fn fit(args: FitArgs) -> Result<Rendered, CliError> {
    let sample = ingest_csv(&args.model.input)?;
    let cfg = forecast_config(&args.model)?;
    let fit = fit_sample(&sample, &cfg)?;
    let r = &fit.residuals.values;
    let report = FitReport {
        observations: sample.len(),
        h_op: fit.h_op,
        bandwidth_fallback: fit.bandwidth_fallback,
        bandwidth: fit.bandwidth,
        g_var: fit.bandwidth.g_var(),
        bounds: fit.bounds,
        residuals: ResidualSummary {
            kind: fit.residuals.kind,
            count: r.len(),
            excluded: fit.residuals.guarded.len(),
            mean: mean(r).unwrap_or(0.0),
            sd: sample_sd(r).unwrap_or(0.0),
            min: r.iter().copied().fold(f64::INFINITY, f64::min),
            max: r.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        },
    };
    let text = match args.model.format {
        TableFormat::Json => serde_json::to_string_pretty(&report).expect("report serializes") + "\n",
        format => {
            let b = &report.bandwidth;
            let rs = &report.residuals;
            let fields: [(&str, String); 17] = [
                ("observations", report.observations.to_string()),
                ("h_op", report.h_op.to_string()),
                ("bandwidth_fallback", report.bandwidth_fallback.to_string()),
                ("strategy", b.strategy.name().to_string()),
                ("h_est", b.h_est.to_string()),
                ("g_gen", b.g_gen.to_string()),
                ("h_var", b.h_var.to_string()),
                ("g_var", report.g_var.to_string()),
                ("mean_cap", report.bounds.mean_cap.to_string()),
                ("sd_floor", report.bounds.sd_floor.to_string()),
                ("sd_cap", report.bounds.sd_cap.to_string()),
                ("residual_kind", rs.kind.suffix().to_string()),
                ("residual_count", rs.count.to_string()),
                ("residual_excluded", rs.excluded.to_string()),
                ("residual_mean", rs.mean.to_string()),
                ("residual_sd", rs.sd.to_string()),
                ("residual_range", format!("{} {}", rs.min, rs.max)),
            ];
            let rows: Vec<Vec<String>> = fields.iter().map(|(k, v)| vec![k.to_string(), v.clone()]).collect();
            render_rows(format, &["field", "value"], &rows)
        }
    };
    Ok((text, args.model.output))
}

fn check_horizon(k: usize) -> Result<(), CliError> {
    if k == 0 {
        return Err(CliError::Usage("horizon k must be at least 1".into()));
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct PointForecast {
    horizon: usize,
    l2_point: f64,
    l1_point: f64,
}

#[derive(Debug, Serialize)]
struct Report<T> {
    seed: u64,
    forecasts: Vec<T>,
}

fn predict(args: PredictArgs, seed: u64) -> Result<Rendered, CliError> {
    check_horizon(args.k)?;
    if args.m < 2 {
        return Err(CliError::Usage("-M must be at least 2".into()));
    }
    let cfg = forecast_config(&args.model)?;
    let sample = ingest_csv(&args.model.input)?;
    let res = qpi_predict(&sample, args.k, args.m, 0.05, &cfg, &mut substream(seed, 0))?;
    let forecasts: Vec<PointForecast> =
        res.iter().map(|r| PointForecast { horizon: r.horizon, l2_point: r.l2_point, l1_point: r.l1_point }).collect();
    let text = match args.model.format {
        TableFormat::Json => serde_json::to_string_pretty(&Report { seed, forecasts }).expect("serializes") + "\n",
        format => {
            let rows: Vec<Vec<String>> = forecasts
                .iter()
                .map(|f| vec![f.horizon.to_string(), f.l2_point.to_string(), f.l1_point.to_string()])
                .collect();
            render_rows(format, &["horizon", "l2_point", "l1_point"], &rows)
        }
    };
    Ok((text, args.model.output))
}

fn interval(args: IntervalArgs, seed: u64) -> Result<Rendered, CliError> {
    let p = &args.predict;
    check_horizon(p.k)?;
    if !(args.alpha > 0.0 && args.alpha < 1.0) {
        return Err(CliError::Usage(format!("alpha must lie in (0, 1), got {}", args.alpha)));
    }
    if p.m < 2 || args.ppi_paths < 2 || args.b.is_some_and(|b| b < 2) {
        return Err(CliError::Usage("-M, -B and --ppi-paths must be at least 2".into()));
    }
    let cfg = ForecastConfig { center: args.center, ..forecast_config(&p.model)? };
    let sample = ingest_csv(&p.model.input)?;
    let mut res: Vec<PredictionResult> = qpi_predict(&sample, p.k, p.m, args.alpha, &cfg, &mut substream(seed, 0))?;
    if let Some(b) = args.b {
        let settings = PpiSettings { k: p.k, b, m: args.ppi_paths, alpha: args.alpha };
        let ppi = ppi_predict(&sample, &settings, &cfg, &mut substream(seed, 1))?;
        for (r, q) in res.iter_mut().zip(ppi) {
            r.ppi = q.ppi;
            r.diagnostics.guard_events += q.diagnostics.guard_events;
            r.diagnostics.retries += q.diagnostics.retries;
            r.diagnostics.failed_replicates += q.diagnostics.failed_replicates;
        }
    }
    let text = match p.model.format {
        TableFormat::Json => serde_json::to_string_pretty(&Report { seed, forecasts: res }).expect("serializes") + "\n",
        format => {
            let rows: Vec<Vec<String>> = res
                .iter()
                .map(|r| {
                    vec![
                        r.horizon.to_string(),
                        r.l2_point.to_string(),
                        r.l1_point.to_string(),
                        r.qpi.0.to_string(),
                        r.qpi.1.to_string(),
                        fmt_cell(r.ppi.map(|v| v.0)),
                        fmt_cell(r.ppi.map(|v| v.1)),
                    ]
                })
                .collect();
            render_rows(
                format,
                &["horizon", "l2_point", "l1_point", "qpi_lower", "qpi_upper", "ppi_lower", "ppi_upper"],
                &rows,
            )
        }
    };
    Ok((text, args.predict.model.output))
}

fn benchmark(
    args: BenchArgs,
    threads: Option<usize>,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<(), CliError> {
    let mut cfg = match (&args.preset, &args.config) {
        (Some(name), _) => bench::preset(name)?,
        (None, Some(path)) => {
            let text = match fs::read_to_string(path) {
                Ok(t) => t,
                Err(e) if e.kind() == io::ErrorKind::NotFound => return Err(CliError::FileNotFound(path.clone())),
                Err(e) => return Err(e.into()),
            };
            ExperimentFile::from_toml(&text)?.into_config()?
        }
        (None, None) => return Err(CliError::Usage("give --preset or --config".into())),
    };
    if args.full_scale {
        cfg = cfg.full_scale();
    }
    if let Some(n) = args.n {
        cfg.n = n;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    cfg.threads = threads;
    cfg.validate()?;
    let _ = writeln!(stderr, "running {} replications of {} methods (seed {})", cfg.n, cfg.methods.len(), cfg.seed);
    let table = bench::run_experiment(&cfg)?;
    emit(&args.output, &emit_table(&table, args.format), stdout)
}
