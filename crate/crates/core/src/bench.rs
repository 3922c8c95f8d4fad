//! Monte-Carlo harness: repeated simulation of a known process, forecasting
//! with each configured method, and MSPE / coverage / length per horizon.
//!
//! Replication `n` draws everything from streams keyed by `(seed, n)`, and
//! aggregation runs in replication order, so tables are bit-identical for any
//! worker count.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bandwidth::Strategy;
use crate::dgp::DgpSpec;
use crate::error::{Error, Result};
use crate::forecast::{
    fit_sample, oracle_predict, ppi_from_fit, qpi_from_fit, resolve_h_op, FittedSample, ForecastConfig, Loss,
    PpiSettings,
};
use crate::kernel::Kernel;
use crate::residuals::ResidualKind;
use crate::rng::{child_seed, substream};
use crate::series::TimeSeries;

/// Cells with fewer completed replications than this fraction of `N` are flagged.
pub const COMPLETION_THRESHOLD: f64 = 0.95;

pub const DESK_SCALE_N: usize = 500;
pub const CI_SCALE_N: usize = 100;
pub const FULL_SCALE_N: usize = 5000;

/// What a method produces for each horizon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MethodKind {
    /// Bootstrap point prediction with fitted residuals and the cross-validated bandwidth.
    BootstrapPoint { loss: Loss },
    OraclePoint { loss: Loss },
    /// Quantile interval; `strategy: None` means the cross-validated bandwidth itself.
    Qpi { residuals: ResidualKind, strategy: Option<Strategy> },
    Ppi { loss: Loss, residuals: ResidualKind, strategy: Strategy },
    /// Oracle quantile interval from the true model.
    Spi,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Method {
    pub name: String,
    pub kind: MethodKind,
}

fn strategy_suffix(s: &str) -> Result<Strategy> {
    match s {
        "u" => Ok(Strategy::Undersmooth),
        "o" => Ok(Strategy::Oversmooth),
        "opv" => Ok(Strategy::OptimalVariance),
        other => Err(Error::Config(format!("unknown bandwidth suffix '-{other}'"))),
    }
}

fn loss_prefix(s: &str) -> Result<Loss> {
    match s {
        "L1" => Ok(Loss::L1),
        "L2" => Ok(Loss::L2),
        other => Err(Error::Config(format!("unknown loss '{other}'"))),
    }
}

impl FromStr for Method {
    type Err = Error;

    /// Accepts `L2-Bootstrap`, `L1-Oracle`, `QPI-f`, `QPI-p-u`, `L2-PPI-p-u`,
    /// `L1-PPI-f-opv`, `SPI`, and the like.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split('-').collect();
        let kind = match parts.as_slice() {
            ["SPI"] => MethodKind::Spi,
            [loss, "Bootstrap"] => MethodKind::BootstrapPoint { loss: loss_prefix(loss)? },
            [loss, "Oracle"] => MethodKind::OraclePoint { loss: loss_prefix(loss)? },
            ["QPI", res] => MethodKind::Qpi { residuals: res.parse()?, strategy: None },
            ["QPI", res, sfx] => MethodKind::Qpi { residuals: res.parse()?, strategy: Some(strategy_suffix(sfx)?) },
            [loss, "PPI", res, sfx] => MethodKind::Ppi {
                loss: loss_prefix(loss)?,
                residuals: res.parse()?,
                strategy: strategy_suffix(sfx)?,
            },
            _ => return Err(Error::Config(format!("unrecognised method '{s}'"))),
        };
        Ok(Method { name: s.trim().to_string(), kind })
    }
}

impl Method {
    pub fn is_interval(&self) -> bool {
        matches!(self.kind, MethodKind::Qpi { .. } | MethodKind::Ppi { .. } | MethodKind::Spi)
    }
}

pub fn parse_methods<S: AsRef<str>>(names: &[S]) -> Result<Vec<Method>> {
    names.iter().map(|n| n.as_ref().parse()).collect()
}

/// One Monte-Carlo study.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub dgp_name: String,
    pub dgp: DgpSpec,
    /// Observed sample is `X_0..X_T`.
    pub t: usize,
    pub k_max: usize,
    /// Replications.
    pub n: usize,
    /// Paths for bootstrap and oracle point predictions, QPI and SPI.
    pub m: usize,
    /// Paths per point prediction inside the PPI double bootstrap.
    pub ppi_m: usize,
    /// Outer PPI replicates.
    pub b: usize,
    pub alpha: f64,
    pub methods: Vec<Method>,
    pub seed: u64,
    pub kernel: Kernel,
    pub homoscedastic: bool,
    /// Worker cap; `None` uses every core.
    pub threads: Option<usize>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 1 || self.k_max < 1 {
            return Err(Error::Config("N and k_max must be at least 1".into()));
        }
        if self.t < 10 {
            return Err(Error::Config(format!("T must be at least 10, got {}", self.t)));
        }
        if self.m < 2 || self.ppi_m < 2 {
            return Err(Error::Config("M must be at least 2".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("no methods configured".into()));
        }
        if self.methods.iter().any(|m| matches!(m.kind, MethodKind::Ppi { .. })) {
            if self.b < 2 {
                return Err(Error::Config("PPI methods need B >= 2".into()));
            }
            if self.t < 19 {
                return Err(Error::Config("PPI methods need T >= 19".into()));
            }
        }
        Ok(())
    }

    /// Full replication count used for the published tables.
    pub fn full_scale(mut self) -> Self {
        self.n = FULL_SCALE_N;
        self
    }
}

/// Nested key-value form of [`ExperimentConfig`] read from TOML files.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentFile {
    pub dgp: String,
    #[serde(rename = "T")]
    pub t: usize,
    #[serde(default = "default_k_max")]
    pub k_max: usize,
    #[serde(rename = "N", default = "default_n")]
    pub n: usize,
    #[serde(rename = "M", default = "default_m")]
    pub m: usize,
    #[serde(rename = "ppi_M", default)]
    pub ppi_m: Option<usize>,
    #[serde(rename = "B", default = "default_b")]
    pub b: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    pub methods: Vec<String>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub kernel: Kernel,
    /// Constant-volatility estimation; defaults to whether the process has constant volatility.
    #[serde(default)]
    pub homoscedastic: Option<bool>,
    #[serde(default)]
    pub burn_in: Option<usize>,
}

fn default_k_max() -> usize {
    5
}
fn default_n() -> usize {
    DESK_SCALE_N
}
fn default_m() -> usize {
    1000
}
fn default_b() -> usize {
    500
}
fn default_alpha() -> f64 {
    0.05
}

impl ExperimentFile {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn into_config(self) -> Result<ExperimentConfig> {
        let mut dgp = DgpSpec::preset(&self.dgp)?;
        if let Some(b) = self.burn_in {
            dgp.burn_in = b;
        }
        let homoscedastic = self.homoscedastic.unwrap_or_else(|| dgp.is_homoscedastic());
        let cfg = ExperimentConfig {
            dgp_name: self.dgp,
            dgp,
            t: self.t,
            k_max: self.k_max,
            n: self.n,
            m: self.m,
            ppi_m: self.ppi_m.unwrap_or(100),
            b: self.b,
            alpha: self.alpha,
            methods: parse_methods(&self.methods)?,
            seed: self.seed,
            kernel: self.kernel,
            homoscedastic,
            threads: None,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Named presets and a one-line description of each.
pub const PRESETS: &[(&str, &str)] = &[
    ("table1-T100", "model 1, N(0,1): L2 bootstrap vs oracle point MSPE, T=100"),
    ("table1-T200", "model 1, N(0,1): L2 bootstrap vs oracle point MSPE, T=200"),
    ("table2-T100", "model 1, chi2(3)-3: L1/L2 bootstrap and oracle point MSPE, T=100"),
    ("table2-T200", "model 1, chi2(3)-3: L1/L2 bootstrap and oracle point MSPE, T=200"),
    ("table3-T100", "model 2, N(0,1): L1/L2 bootstrap and oracle point MSPE, T=100"),
    ("table3-T200", "model 2, N(0,1): L1/L2 bootstrap and oracle point MSPE, T=200"),
    ("table4-T50", "model 1: QPI/PPI/SPI coverage and length, T=50"),
    ("table4-T100", "model 1: QPI/PPI/SPI coverage and length, T=100"),
    ("table4-T200", "model 1: QPI/PPI/SPI coverage and length, T=200"),
    ("table5-T50", "model 2: QPI/PPI-opv/SPI coverage and length, T=50"),
    ("table5-T100", "model 2: QPI/PPI-opv/SPI coverage and length, T=100"),
    ("table5-T200", "model 2: QPI/PPI-opv/SPI coverage and length, T=200"),
    ("appb-T1000", "model 1: optimal vs under-smoothed QPI, T=1000"),
    ("appc-T50", "model 1: under- vs over-smoothed PPI, T=50"),
    ("appc-T500", "model 1: under- vs over-smoothed PPI, T=500"),
    ("appd-T50", "model 2: under-smoothed vs optimal variance bandwidth PPI, T=50"),
];

const POINT_METHODS: [&str; 4] = ["L2-Bootstrap", "L1-Bootstrap", "L2-Oracle", "L1-Oracle"];
const MODEL1_INTERVALS: [&str; 9] =
    ["QPI-f", "QPI-p", "QPI-f-u", "QPI-p-u", "L2-PPI-f-u", "L2-PPI-p-u", "L1-PPI-f-u", "L1-PPI-p-u", "SPI"];
const MODEL2_INTERVALS: [&str; 9] =
    ["QPI-f", "QPI-p", "QPI-f-u", "QPI-p-u", "L2-PPI-f-opv", "L2-PPI-p-opv", "L1-PPI-f-opv", "L1-PPI-p-opv", "SPI"];
const OVER_UNDER: [&str; 9] = [
    "L2-PPI-f-u", "L1-PPI-f-u", "L2-PPI-p-u", "L1-PPI-p-u", "L2-PPI-f-o", "L1-PPI-f-o", "L2-PPI-p-o", "L1-PPI-p-o", "SPI",
];
const VARIANCE_BW: [&str; 9] = [
    "L2-PPI-f-u", "L1-PPI-f-u", "L2-PPI-p-u", "L1-PPI-p-u", "L2-PPI-f-opv", "L1-PPI-f-opv", "L2-PPI-p-opv",
    "L1-PPI-p-opv", "SPI",
];

/// Desk-scale configuration of a named preset (`N = 500`).
pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let (family, t) = name
        .rsplit_once("-T")
        .and_then(|(f, t)| t.parse::<usize>().ok().map(|t| (f, t)))
        .ok_or_else(|| Error::Config(format!("unknown preset '{name}'")))?;
    if !PRESETS.iter().any(|(p, _)| *p == name) {
        return Err(Error::Config(format!("unknown preset '{name}'")));
    }
    let (dgp, methods, m): (&str, &[&str], usize) = match family {
        "table1" => ("model1-normal", &["L2-Bootstrap", "L2-Oracle"], 1000),
        "table2" => ("model1-chisq", &POINT_METHODS, 1000),
        "table3" => ("model2-normal", &POINT_METHODS, 1000),
        "table4" => ("model1-normal", &MODEL1_INTERVALS, 500),
        "table5" => ("model2-normal", &MODEL2_INTERVALS, 500),
        "appb" => ("model1-normal", &["QPI-f", "QPI-f-u", "QPI-p", "QPI-p-u"], 500),
        "appc" => ("model1-normal", &OVER_UNDER, 500),
        "appd" => ("model2-normal", &VARIANCE_BW, 500),
        _ => return Err(Error::Config(format!("unknown preset '{name}'"))),
    };
    let spec = DgpSpec::preset(dgp)?;
    let cfg = ExperimentConfig {
        dgp_name: dgp.to_string(),
        homoscedastic: spec.is_homoscedastic(),
        dgp: spec,
        t,
        k_max: 5,
        n: DESK_SCALE_N,
        m,
        ppi_m: 100,
        b: 500,
        alpha: 0.05,
        methods: parse_methods(methods)?,
        seed: 20_240_601,
        kernel: Kernel::Epanechnikov,
        threads: None,
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Mean squared prediction error.
pub fn mspe(predictions: &[f64], truths: &[f64]) -> Result<f64> {
    paired(predictions.len(), truths.len())?;
    let sse: f64 = predictions.iter().zip(truths).map(|(p, x)| (x - p) * (x - p)).sum();
    Ok(sse / truths.len() as f64)
}

/// Fraction of truths inside the closed intervals.
pub fn cvr(intervals: &[(f64, f64)], truths: &[f64]) -> Result<f64> {
    paired(intervals.len(), truths.len())?;
    let hits = intervals.iter().zip(truths).filter(|((lo, hi), x)| lo <= x && *x <= hi).count();
    Ok(hits as f64 / truths.len() as f64)
}

/// Mean interval length.
pub fn len(intervals: &[(f64, f64)]) -> Result<f64> {
    if intervals.is_empty() {
        return Err(Error::LengthMismatch { left: 0, right: 1 });
    }
    Ok(intervals.iter().map(|(lo, hi)| hi - lo).sum::<f64>() / intervals.len() as f64)
}

fn paired(left: usize, right: usize) -> Result<()> {
    if left != right || left == 0 {
        return Err(Error::LengthMismatch { left, right });
    }
    Ok(())
}

/// Metrics for one (method, horizon) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub method: String,
    pub horizon: usize,
    pub mspe: Option<f64>,
    pub cvr: Option<f64>,
    pub len: Option<f64>,
    /// Replications that produced a forecast for this method.
    pub completed: usize,
    pub guard_events: usize,
    pub failed_replicates: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsTable {
    /// Replications requested.
    pub replications: usize,
    pub rows: Vec<MetricsRow>,
}

impl MetricsTable {
    pub fn empty() -> Self {
        Self { replications: 0, rows: Vec::new() }
    }

    pub fn get(&self, method: &str, horizon: usize) -> Option<&MetricsRow> {
        self.rows.iter().find(|r| r.method == method && r.horizon == horizon)
    }

    /// Whether a row fell below the completion threshold.
    pub fn is_incomplete(&self, row: &MetricsRow) -> bool {
        (row.completed as f64) < COMPLETION_THRESHOLD * self.replications as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TableFormat {
    Csv,
    Markdown,
    Json,
}

impl FromStr for TableFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(TableFormat::Csv),
            "markdown" | "md" => Ok(TableFormat::Markdown),
            "json" => Ok(TableFormat::Json),
            other => Err(Error::Config(format!("unknown format '{other}'"))),
        }
    }
}

fn fmt_opt(v: Option<f64>, decimals: usize, missing: &str) -> String {
    v.map(|x| format!("{x:.decimals$}")).unwrap_or_else(|| missing.to_string())
}

/// Renders the table. CSV and markdown carry `method, horizon, mspe, cvr, len`
/// with 4, 3 and 2 decimals; JSON carries every field at full precision.
pub fn emit_table(table: &MetricsTable, format: TableFormat) -> String {
    let mut out = String::new();
    match format {
        TableFormat::Csv => {
            out.push_str("method,horizon,mspe,cvr,len\n");
            for r in &table.rows {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{}",
                    r.method,
                    r.horizon,
                    fmt_opt(r.mspe, 4, ""),
                    fmt_opt(r.cvr, 3, ""),
                    fmt_opt(r.len, 2, "")
                );
            }
        }
        TableFormat::Markdown => {
            out.push_str("| method | horizon | mspe | cvr | len |\n|---|---:|---:|---:|---:|\n");
            let mut flagged = Vec::new();
            for r in &table.rows {
                let mark = if table.is_incomplete(r) {
                    flagged.push(format!("{} step {}: {}/{}", r.method, r.horizon, r.completed, table.replications));
                    "*"
                } else {
                    ""
                };
                let _ = writeln!(
                    out,
                    "| {}{} | {} | {} | {} | {} |",
                    r.method,
                    mark,
                    r.horizon,
                    fmt_opt(r.mspe, 4, "-"),
                    fmt_opt(r.cvr, 3, "-"),
                    fmt_opt(r.len, 2, "-")
                );
            }
            if !flagged.is_empty() {
                let _ = writeln!(out, "\n\\* completed replications below 95%: {}", flagged.join("; "));
            }
        }
        TableFormat::Json => {
            out = serde_json::to_string_pretty(table).expect("metrics serialize");
            out.push('\n');
        }
    }
    out
}

pub fn parse_json_table(text: &str) -> Result<MetricsTable> {
    serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
}

/// Per-horizon output of one method in one replication.
#[derive(Debug, Clone, Copy, Default)]
struct Outcome {
    point: Option<f64>,
    interval: Option<(f64, f64)>,
}

struct MethodRun {
    outcomes: Vec<Outcome>,
    guard_events: usize,
    failed_replicates: usize,
}

struct Replication<'a> {
    cfg: &'a ExperimentConfig,
    sample: TimeSeries,
    h_op: Option<Result<(f64, bool)>>,
    fits: HashMap<(Option<Strategy>, ResidualKind), Result<FittedSample>>,
}

impl<'a> Replication<'a> {
    fn base_config(&self) -> ForecastConfig {
        ForecastConfig { kernel: self.cfg.kernel, homoscedastic: self.cfg.homoscedastic, ..ForecastConfig::default() }
    }

    fn h_op(&mut self) -> Result<f64> {
        if self.h_op.is_none() {
            self.h_op = Some(resolve_h_op(&self.sample, &self.base_config()));
        }
        self.h_op.clone().expect("set above").map(|(h, _)| h)
    }

    fn forecast_config(&mut self, strategy: Option<Strategy>, residuals: ResidualKind, center: Loss) -> Result<ForecastConfig> {
        Ok(ForecastConfig {
            // no strategy: estimate at h_op itself, which is what B2 uses for h
            strategy: strategy.unwrap_or(Strategy::Oversmooth),
            residuals,
            center,
            h_op: Some(self.h_op()?),
            ..self.base_config()
        })
    }

    fn fit(&mut self, strategy: Option<Strategy>, residuals: ResidualKind) -> Result<FittedSample> {
        let key = (strategy.filter(|&s| s != Strategy::Oversmooth), residuals);
        if !self.fits.contains_key(&key) {
            let cfg = self.forecast_config(strategy, residuals, Loss::L2)?;
            let fit = fit_sample(&self.sample, &cfg);
            self.fits.insert(key, fit);
        }
        self.fits[&key].clone()
    }

    fn run(&mut self, method: &Method, rng: &mut crate::rng::StreamRng) -> Result<MethodRun> {
        let cfg = self.cfg;
        let x_t = self.sample.last().ok_or(Error::EmptySample)?;
        let pick = |loss: Loss, l2: f64, l1: f64| if loss == Loss::L2 { l2 } else { l1 };
        let (outcomes, guard_events, failed) = match method.kind {
            MethodKind::OraclePoint { loss } => {
                let res = oracle_predict(&cfg.dgp, x_t, cfg.k_max, cfg.m, cfg.alpha, rng)?;
                let o = res.iter().map(|r| Outcome { point: Some(pick(loss, r.l2_point, r.l1_point)), interval: None });
                (o.collect(), 0, 0)
            }
            MethodKind::Spi => {
                let res = oracle_predict(&cfg.dgp, x_t, cfg.k_max, cfg.m, cfg.alpha, rng)?;
                (res.iter().map(|r| Outcome { point: None, interval: Some(r.qpi) }).collect(), 0, 0)
            }
            MethodKind::BootstrapPoint { loss } => {
                let fit = self.fit(None, ResidualKind::Fitted)?;
                let fc = self.forecast_config(None, ResidualKind::Fitted, loss)?;
                let res = qpi_from_fit(&self.sample, &fit, cfg.k_max, cfg.m, cfg.alpha, &fc, rng)?;
                let ge = res.first().map_or(0, |r| r.diagnostics.guard_events);
                let o = res.iter().map(|r| Outcome { point: Some(pick(loss, r.l2_point, r.l1_point)), interval: None });
                (o.collect(), ge, 0)
            }
            MethodKind::Qpi { residuals, strategy } => {
                let fit = self.fit(strategy, residuals)?;
                let fc = self.forecast_config(strategy, residuals, Loss::L2)?;
                let res = qpi_from_fit(&self.sample, &fit, cfg.k_max, cfg.m, cfg.alpha, &fc, rng)?;
                let ge = res.first().map_or(0, |r| r.diagnostics.guard_events);
                (res.iter().map(|r| Outcome { point: None, interval: Some(r.qpi) }).collect(), ge, 0)
            }
            MethodKind::Ppi { loss, residuals, strategy } => {
                let fit = self.fit(Some(strategy), residuals)?;
                let fc = self.forecast_config(Some(strategy), residuals, loss)?;
                let settings = PpiSettings { k: cfg.k_max, b: cfg.b, m: cfg.ppi_m, alpha: cfg.alpha };
                let res = ppi_from_fit(&self.sample, &fit, &settings, &fc, rng)?;
                let d = res.first().map(|r| r.diagnostics).unwrap_or_default();
                (res.iter().map(|r| Outcome { point: None, interval: r.ppi }).collect(), d.guard_events, d.failed_replicates)
            }
        };
        Ok(MethodRun { outcomes, guard_events, failed_replicates: failed })
    }
}

/// Runs `cfg.n` replications of every configured method.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<MetricsTable> {
    cfg.validate()?;
    match cfg.threads {
        Some(threads) => rayon::ThreadPoolBuilder::new()
            .num_threads(threads.max(1))
            .build()
            .map_err(|e| Error::Config(e.to_string()))?
            .install(|| run_replications(cfg)),
        None => run_replications(cfg),
    }
}

type ReplicationOutput = (Vec<f64>, Vec<Option<MethodRun>>);

fn run_replications(cfg: &ExperimentConfig) -> Result<MetricsTable> {
    let per_rep: Vec<Result<ReplicationOutput>> = (0..cfg.n)
        .into_par_iter()
        .map(|n| {
            let seed = child_seed(cfg.seed, n as u64);
            let path = cfg.dgp.generate_series(cfg.t + cfg.k_max, &mut substream(seed, 0))?;
            let values = path.into_values();
            let truths = values[cfg.t + 1..].to_vec();
            let mut rep = Replication {
                cfg,
                sample: TimeSeries::new(values[..=cfg.t].to_vec()),
                h_op: None,
                fits: HashMap::new(),
            };
            let runs = cfg
                .methods
                .iter()
                .enumerate()
                .map(|(j, method)| rep.run(method, &mut substream(seed, j as u64 + 1)).ok())
                .collect();
            Ok((truths, runs))
        })
        .collect();
    let per_rep = per_rep.into_iter().collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::with_capacity(cfg.methods.len() * cfg.k_max);
    for (j, method) in cfg.methods.iter().enumerate() {
        for step in 0..cfg.k_max {
            let mut points = Vec::new();
            let mut point_truths = Vec::new();
            let mut intervals = Vec::new();
            let mut interval_truths = Vec::new();
            let mut completed = 0;
            let mut guard_events = 0;
            let mut failed_replicates = 0;
            for (truths, runs) in &per_rep {
                let Some(run) = &runs[j] else { continue };
                completed += 1;
                guard_events += run.guard_events;
                failed_replicates += run.failed_replicates;
                let o = run.outcomes[step];
                if let Some(p) = o.point {
                    points.push(p);
                    point_truths.push(truths[step]);
                }
                if let Some(iv) = o.interval {
                    intervals.push(iv);
                    interval_truths.push(truths[step]);
                }
            }
            rows.push(MetricsRow {
                method: method.name.clone(),
                horizon: step + 1,
                mspe: mspe(&points, &point_truths).ok(),
                cvr: cvr(&intervals, &interval_truths).ok(),
                len: len(&intervals).ok(),
                completed,
                guard_events,
                failed_replicates,
            });
        }
    }
    Ok(MetricsTable { replications: cfg.n, rows })
}
