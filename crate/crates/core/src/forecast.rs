//! Forward-bootstrap forecasting: path simulation, L1/L2 point predictions,
//! quantile prediction intervals (QPI) and pertinent prediction intervals
//! (PPI) from the double bootstrap over predictive roots.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bandwidth::{apply_strategy_with, select_bandwidth, Bandwidth, Multipliers, Strategy};
use crate::dgp::DgpSpec;
use crate::error::{Error, Result};
use crate::estimator::{ConditionalModel, EstimatedModel, FitOptions, TruncationBounds, World};
use crate::kernel::Kernel;
use crate::residuals::{fitted_residuals, predictive_residuals, InnovationSource, ResidualDist, ResidualKind, ResidualSet};
use crate::rng::{child_seed, fork_seed, substream, StreamRng};
use crate::series::{median_sorted, TimeSeries};

/// Bandwidth used when the predictors carry no spread to cross-validate on.
pub const DEGENERATE_FALLBACK_BANDWIDTH: f64 = 1.0;
pub const MIN_QPI_LEN: usize = 10;
pub const MIN_PPI_LEN: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Loss {
    L1,
    L2,
}

impl Loss {
    pub fn name(self) -> &'static str {
        match self {
            Loss::L1 => "L1",
            Loss::L2 => "L2",
        }
    }

    /// Guard replacement matching the loss: sample mean for L2, median for L1.
    pub fn guard_policy(self) -> GuardPolicy {
        match self {
            Loss::L1 => GuardPolicy::Median,
            Loss::L2 => GuardPolicy::Mean,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GuardPolicy {
    Mean,
    Median,
}

/// Replacement for pseudo-values that cannot be formed or are not finite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Guard {
    replacement: Option<f64>,
}

impl Guard {
    pub fn new(policy: GuardPolicy, sample: &TimeSeries) -> Result<Self> {
        let v = match policy {
            GuardPolicy::Mean => sample.mean()?,
            GuardPolicy::Median => sample.median()?,
        };
        Ok(Self { replacement: Some(v) })
    }

    pub fn fixed(value: f64) -> Self {
        Self { replacement: Some(value) }
    }

    /// No replacement: invalid pseudo-values become errors.
    pub fn strict() -> Self {
        Self { replacement: None }
    }

    /// Returns the value to use and whether a replacement happened.
    #[inline]
    pub fn apply(&self, v: Result<f64>) -> Result<(f64, bool)> {
        match v {
            Ok(x) if x.is_finite() => Ok((x, false)),
            Ok(x) => self.replacement.map(|r| (r, true)).ok_or(Error::InvalidParameter(format!("non-finite pseudo-value {x}"))),
            Err(Error::ZeroDenominator { x }) => self.replacement.map(|r| (r, true)).ok_or(Error::ZeroDenominator { x }),
            Err(e) => Err(e),
        }
    }
}

/// Passes finite values through and replaces anything else by the sample mean or median.
pub fn guard_value(v: f64, policy: GuardPolicy, sample: &TimeSeries) -> Result<f64> {
    Guard::new(policy, sample)?.apply(Ok(v)).map(|(x, _)| x)
}

/// One step of the recursion from `x` with innovation `e`, guarded.
#[inline]
fn guarded_step(model: &impl ConditionalModel, x: f64, e: f64, guard: &Guard) -> Result<(f64, bool)> {
    guard.apply(model.estimate(x).map(|est| est.mean + est.sd * e))
}

/// `M x k` matrix of simulated future paths; row `i` holds `X*_{T+1}, ..., X*_{T+k}`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathMatrix {
    values: Vec<f64>,
    rows: usize,
    horizon: usize,
    pub origin: f64,
    /// Number of guarded pseudo-values.
    pub guarded: usize,
}

impl PathMatrix {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.horizon..(i + 1) * self.horizon]
    }

    /// Values at step `step` (1-based) across all paths.
    pub fn column(&self, step: usize) -> Vec<f64> {
        assert!((1..=self.horizon).contains(&step), "step {step} outside 1..={}", self.horizon);
        (0..self.rows).map(|i| self.values[i * self.horizon + step - 1]).collect()
    }

    pub fn endpoints(&self) -> Vec<f64> {
        self.column(self.horizon)
    }
}

/// Simulates `m` independent trajectories of length `k` from `x_t`.
pub fn simulate_paths(
    model: &impl ConditionalModel,
    innovations: &impl InnovationSource,
    x_t: f64,
    k: usize,
    m: usize,
    rng: &mut StreamRng,
    guard: &Guard,
) -> Result<PathMatrix> {
    if k == 0 || m == 0 {
        return Err(Error::InvalidParameter(format!("need k >= 1 and M >= 1, got k={k}, M={m}")));
    }
    let mut values = Vec::with_capacity(m * k);
    let mut guarded = 0;
    for _ in 0..m {
        let mut x = x_t;
        for _ in 0..k {
            let e = innovations.draw(rng);
            let (next, replaced) = guarded_step(model, x, e, guard)?;
            guarded += usize::from(replaced);
            x = next;
            values.push(x);
        }
    }
    Ok(PathMatrix { values, rows: m, horizon: k, origin: x_t, guarded })
}

/// Mean (L2) or median (L1) of the values.
pub fn point_predict(values: &[f64], loss: Loss) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptySample);
    }
    Ok(match loss {
        Loss::L2 => values.iter().sum::<f64>() / values.len() as f64,
        Loss::L1 => {
            let mut v = values.to_vec();
            v.sort_by(f64::total_cmp);
            median_sorted(&v)
        }
    })
}

/// Order statistic at rank `ceil(n * beta)` (1-based, at least 1) of sorted values.
pub fn quantile_sorted(sorted: &[f64], beta: f64) -> f64 {
    let n = sorted.len();
    let rank = ((n as f64 * beta) - 1e-9).ceil().clamp(1.0, n as f64) as usize;
    sorted[rank - 1]
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

/// Equal-tailed interval from the `alpha/2` and `1 - alpha/2` order statistics.
pub fn qpi(values: &[f64], alpha: f64) -> Result<(f64, f64)> {
    check_alpha(alpha)?;
    if values.len() < 2 {
        return Err(Error::SampleTooShort { required: 2, actual: values.len() });
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Ok((quantile_sorted(&v, alpha / 2.0), quantile_sorted(&v, 1.0 - alpha / 2.0)))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Pseudo-values replaced by the guard.
    pub guard_events: usize,
    /// Residuals left out because their fit had no kernel mass.
    pub guarded_residuals: usize,
    /// Bootstrap replicates that needed a fresh draw.
    pub retries: usize,
    /// Bootstrap replicates abandoned after exhausting retries.
    pub failed_replicates: usize,
    /// Set when the predictors had zero spread and the fallback bandwidth was used.
    pub bandwidth_fallback: bool,
}

impl Diagnostics {
    fn merge(&mut self, other: &Diagnostics) {
        self.guard_events += other.guard_events;
        self.guarded_residuals += other.guarded_residuals;
        self.retries += other.retries;
        self.failed_replicates += other.failed_replicates;
        self.bandwidth_fallback |= other.bandwidth_fallback;
    }
}

/// Forecast at one horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionResult {
    pub horizon: usize,
    pub l2_point: f64,
    pub l1_point: f64,
    pub qpi: (f64, f64),
    pub ppi: Option<(f64, f64)>,
    pub alpha: f64,
    pub diagnostics: Diagnostics,
}

/// Settings shared by the QPI and PPI pipelines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForecastConfig {
    pub kernel: Kernel,
    pub strategy: Strategy,
    pub multipliers: Multipliers,
    pub residuals: ResidualKind,
    pub homoscedastic: bool,
    /// Standard deviation of the Gaussian convolved with the residual distribution.
    pub smoothing_sd: f64,
    /// Use this `h_op` instead of cross-validating.
    pub h_op: Option<f64>,
    /// Loss whose point prediction centres the PPI; also picks the guard policy.
    pub center: Loss,
    /// Recompute predictive residuals on every bootstrap series for the inner prediction.
    pub exact_inner: bool,
    /// Fresh draws allowed per failing bootstrap replicate.
    pub retries: usize,
}

impl Default for ForecastConfig {
    fn default() -> Self {
        Self {
            kernel: Kernel::Epanechnikov,
            strategy: Strategy::Oversmooth,
            multipliers: Multipliers::default(),
            residuals: ResidualKind::Fitted,
            homoscedastic: false,
            smoothing_sd: 0.0,
            h_op: None,
            center: Loss::L2,
            exact_inner: false,
            retries: 3,
        }
    }
}

/// Estimators and residual distribution fitted on the observed sample.
#[derive(Debug, Clone)]
pub struct FittedSample {
    pub h_op: f64,
    pub bandwidth: Bandwidth,
    pub bounds: TruncationBounds,
    pub model: EstimatedModel,
    pub residuals: ResidualSet,
    pub dist: ResidualDist,
    pub bandwidth_fallback: bool,
}

impl FittedSample {
    /// Model with the bootstrap-generation bandwidths `g`, on the same sample and bounds.
    ///
    /// A homoscedastic generating model keeps the innovation scale of the
    /// estimation fit; only its mean function is re-smoothed with `g`.
    pub fn generation_model(&self, sample: &TimeSeries, cfg: &ForecastConfig) -> Result<EstimatedModel> {
        let bw = &self.bandwidth;
        if bw.g_gen == bw.h_est && bw.g_var() == bw.h_var {
            return Ok(self.model.clone());
        }
        let model_g =
            EstimatedModel::fit(sample, FitOptions::new(cfg.kernel, bw.g_gen, bw.g_var(), cfg.homoscedastic), self.bounds)?;
        if cfg.homoscedastic {
            model_g.with_variance_of(&self.model)
        } else {
            Ok(model_g)
        }
    }
}

/// Cross-validated `h_op`, falling back to a fixed bandwidth on zero-spread predictors.
pub fn resolve_h_op(sample: &TimeSeries, cfg: &ForecastConfig) -> Result<(f64, bool)> {
    if let Some(h) = cfg.h_op {
        return Ok((h, false));
    }
    match select_bandwidth(sample, cfg.kernel) {
        Ok(h) => Ok((h, false)),
        Err(Error::DegenerateSample) => Ok((DEGENERATE_FALLBACK_BANDWIDTH, true)),
        Err(e) => Err(e),
    }
}

fn residual_dist(
    sample: &TimeSeries,
    model: &EstimatedModel,
    kind: ResidualKind,
    smoothing_sd: f64,
) -> Result<(ResidualSet, ResidualDist)> {
    let residuals = match kind {
        ResidualKind::Fitted => fitted_residuals(sample, model)?,
        ResidualKind::Predictive => predictive_residuals(sample, model)?,
    };
    let dist = ResidualDist::center(&residuals.values, smoothing_sd)?;
    Ok((residuals, dist))
}

/// Fits the estimators with real-world bounds and builds the residual distribution.
pub fn fit_sample(sample: &TimeSeries, cfg: &ForecastConfig) -> Result<FittedSample> {
    let (h_op, bandwidth_fallback) = resolve_h_op(sample, cfg)?;
    let bandwidth = apply_strategy_with(h_op, cfg.strategy, cfg.homoscedastic, cfg.multipliers)?;
    let bounds = TruncationBounds::from_sample(sample, World::Real)?;
    let opts = FitOptions::new(cfg.kernel, bandwidth.h_est, bandwidth.h_var, cfg.homoscedastic);
    let model = EstimatedModel::fit(sample, opts, bounds)?;
    let (residuals, dist) = residual_dist(sample, &model, cfg.residuals, cfg.smoothing_sd)?;
    Ok(FittedSample { h_op, bandwidth, bounds, model, residuals, dist, bandwidth_fallback })
}

fn summarize(
    paths: &PathMatrix,
    alpha: f64,
    diagnostics: Diagnostics,
) -> Result<Vec<PredictionResult>> {
    (1..=paths.horizon())
        .map(|step| {
            let col = paths.column(step);
            Ok(PredictionResult {
                horizon: step,
                l2_point: point_predict(&col, Loss::L2)?,
                l1_point: point_predict(&col, Loss::L1)?,
                qpi: qpi(&col, alpha)?,
                ppi: None,
                alpha,
                diagnostics,
            })
        })
        .collect()
}

/// Point predictions and QPIs for horizons `1..=k` from one fitted sample.
pub fn qpi_from_fit(
    sample: &TimeSeries,
    fit: &FittedSample,
    k: usize,
    m: usize,
    alpha: f64,
    cfg: &ForecastConfig,
    rng: &mut StreamRng,
) -> Result<Vec<PredictionResult>> {
    check_alpha(alpha)?;
    if m < 2 {
        return Err(Error::InvalidParameter(format!("QPI needs M >= 2, got {m}")));
    }
    let x_t = sample.last().ok_or(Error::EmptySample)?;
    let guard = Guard::new(cfg.center.guard_policy(), sample)?;
    let paths = simulate_paths(&fit.model, &fit.dist, x_t, k, m, rng, &guard)?;
    let diagnostics = Diagnostics {
        guard_events: paths.guarded,
        guarded_residuals: fit.residuals.guarded.len(),
        bandwidth_fallback: fit.bandwidth_fallback,
        ..Diagnostics::default()
    };
    summarize(&paths, alpha, diagnostics)
}

/// Bootstrap point prediction and QPI with fitted or predictive residuals.
///
/// Returns one result per horizon `1..=k`.
pub fn qpi_predict(
    sample: &TimeSeries,
    k: usize,
    m: usize,
    alpha: f64,
    cfg: &ForecastConfig,
    rng: &mut StreamRng,
) -> Result<Vec<PredictionResult>> {
    if sample.len() < MIN_QPI_LEN {
        return Err(Error::SampleTooShort { required: MIN_QPI_LEN, actual: sample.len() });
    }
    let fit = fit_sample(sample, cfg)?;
    qpi_from_fit(sample, &fit, k, m, alpha, cfg, rng)
}

/// Bootstrap series `X*_0, ..., X*_T` from the generating model, started at a
/// uniformly drawn observation. `innovations` supplies `X*_1..X*_T`.
pub fn generate_bootstrap_series(
    model_g: &impl ConditionalModel,
    innovations: &[f64],
    sample: &TimeSeries,
    rng: &mut StreamRng,
    guard: &Guard,
) -> Result<(TimeSeries, usize)> {
    if sample.is_empty() {
        return Err(Error::EmptySample);
    }
    let start = sample.values()[rng.random_range(0..sample.len())];
    let mut out = Vec::with_capacity(innovations.len() + 1);
    out.push(start);
    let mut x = start;
    let mut guarded = 0;
    for &e in innovations {
        let (next, replaced) = guarded_step(model_g, x, e, guard)?;
        guarded += usize::from(replaced);
        x = next;
        out.push(x);
    }
    Ok((TimeSeries::new(out), guarded))
}

/// Settings for the double bootstrap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PpiSettings {
    pub k: usize,
    /// Outer bootstrap replicates.
    pub b: usize,
    /// Paths per point prediction.
    pub m: usize,
    pub alpha: f64,
}

struct Replicate {
    roots: Vec<f64>,
    guard_events: usize,
    retries: usize,
}

/// Predictive roots `X*_{T+j} - X_hat*_{T+j}` for `j = 1..=k` from one bootstrap world.
#[allow(clippy::too_many_arguments)]
fn bootstrap_roots(
    sample: &TimeSeries,
    fit: &FittedSample,
    model_g: &EstimatedModel,
    settings: &PpiSettings,
    cfg: &ForecastConfig,
    real_guard: &Guard,
    rng: &mut StreamRng,
) -> Result<(Vec<f64>, usize)> {
    let t = sample.transitions();
    let k = settings.k;
    let x_t = sample.last().ok_or(Error::EmptySample)?;
    let eps = fit.dist.sample_innovations(t + k, rng);
    let (boot, mut guard_events) = generate_bootstrap_series(model_g, &eps[..t], sample, rng, real_guard)?;

    let bounds = TruncationBounds::from_sample(&boot, World::Bootstrap { real: &fit.bounds })?;
    let opts = FitOptions::new(cfg.kernel, fit.bandwidth.h_est, fit.bandwidth.h_var, cfg.homoscedastic);
    let model_star = EstimatedModel::fit(&boot, opts, bounds)?;

    // forward bootstrap: the future starts from the observed X_T
    let mut future = Vec::with_capacity(k);
    let mut x = x_t;
    for &e in &eps[t..] {
        let (next, replaced) = guarded_step(model_g, x, e, real_guard)?;
        guard_events += usize::from(replaced);
        x = next;
        future.push(x);
    }

    let boot_guard = Guard::new(cfg.center.guard_policy(), &boot)?;
    let inner_exact;
    let inner: &ResidualDist = if cfg.exact_inner && cfg.residuals == ResidualKind::Predictive {
        let (_, d) = residual_dist(&boot, &model_star, ResidualKind::Predictive, cfg.smoothing_sd)?;
        inner_exact = d;
        &inner_exact
    } else {
        &fit.dist
    };
    let paths = simulate_paths(&model_star, inner, x_t, k, settings.m, rng, &boot_guard)?;
    guard_events += paths.guarded;
    let roots = future
        .iter()
        .enumerate()
        .map(|(j, fx)| Ok(fx - point_predict(&paths.column(j + 1), cfg.center)?))
        .collect::<Result<Vec<_>>>()?;
    if roots.iter().any(|r| !r.is_finite()) {
        return Err(Error::InvalidParameter("non-finite predictive root".into()));
    }
    Ok((roots, guard_events))
}

/// Point predictions, QPIs and PPIs for horizons `1..=k` from one fitted sample.
pub fn ppi_from_fit(
    sample: &TimeSeries,
    fit: &FittedSample,
    settings: &PpiSettings,
    cfg: &ForecastConfig,
    rng: &mut StreamRng,
) -> Result<Vec<PredictionResult>> {
    check_alpha(settings.alpha)?;
    if settings.b < 2 || settings.m < 2 || settings.k < 1 {
        return Err(Error::InvalidParameter(format!(
            "PPI needs B >= 2, M >= 2, k >= 1; got B={}, M={}, k={}",
            settings.b, settings.m, settings.k
        )));
    }
    let x_t = sample.last().ok_or(Error::EmptySample)?;
    let real_guard = Guard::new(cfg.center.guard_policy(), sample)?;
    let model_g = fit.generation_model(sample, cfg)?;

    let paths = simulate_paths(&fit.model, &fit.dist, x_t, settings.k, settings.m, rng, &real_guard)?;
    let mut diagnostics = Diagnostics {
        guard_events: paths.guarded,
        guarded_residuals: fit.residuals.guarded.len(),
        bandwidth_fallback: fit.bandwidth_fallback,
        ..Diagnostics::default()
    };
    let mut results = summarize(&paths, settings.alpha, Diagnostics::default())?;

    let base = fork_seed(rng);
    let replicates: Vec<Option<Replicate>> = (0..settings.b)
        .into_par_iter()
        .map(|b| {
            let mut rng = substream(child_seed(base, b as u64), 0);
            for attempt in 0..=cfg.retries {
                if let Ok((roots, guard_events)) =
                    bootstrap_roots(sample, fit, &model_g, settings, cfg, &real_guard, &mut rng)
                {
                    return Some(Replicate { roots, guard_events, retries: attempt });
                }
            }
            None
        })
        .collect();

    let mut roots: Vec<Vec<f64>> = vec![Vec::with_capacity(settings.b); settings.k];
    for rep in &replicates {
        match rep {
            Some(r) => {
                diagnostics.guard_events += r.guard_events;
                diagnostics.retries += r.retries;
                for (j, v) in r.roots.iter().enumerate() {
                    roots[j].push(*v);
                }
            }
            None => {
                diagnostics.retries += cfg.retries;
                diagnostics.failed_replicates += 1;
            }
        }
    }
    if roots[0].len() < 2 {
        return Err(Error::InvalidParameter("too few successful bootstrap replicates".into()));
    }
    for (res, mut r) in results.iter_mut().zip(roots) {
        r.sort_by(f64::total_cmp);
        let center = match cfg.center {
            Loss::L2 => res.l2_point,
            Loss::L1 => res.l1_point,
        };
        let lo = center + quantile_sorted(&r, settings.alpha / 2.0);
        let hi = center + quantile_sorted(&r, 1.0 - settings.alpha / 2.0);
        res.ppi = Some((lo, hi));
        res.diagnostics.merge(&diagnostics);
    }
    Ok(results)
}

/// Pertinent prediction intervals by the double (forward) bootstrap.
///
/// Returns one result per horizon `1..=k`; `ppi` is centred at the point
/// prediction selected by `cfg.center`.
pub fn ppi_predict(
    sample: &TimeSeries,
    settings: &PpiSettings,
    cfg: &ForecastConfig,
    rng: &mut StreamRng,
) -> Result<Vec<PredictionResult>> {
    if sample.len() < MIN_PPI_LEN {
        return Err(Error::SampleTooShort { required: MIN_PPI_LEN, actual: sample.len() });
    }
    let fit = fit_sample(sample, cfg)?;
    ppi_from_fit(sample, &fit, settings, cfg, rng)
}

/// Simulation-based prediction with the true model and innovation law (SPI).
pub fn oracle_predict(
    dgp: &DgpSpec,
    x_t: f64,
    k: usize,
    m: usize,
    alpha: f64,
    rng: &mut StreamRng,
) -> Result<Vec<PredictionResult>> {
    check_alpha(alpha)?;
    let paths = simulate_paths(dgp, &dgp.innovation, x_t, k, m, rng, &Guard::strict())?;
    summarize(&paths, alpha, Diagnostics::default())
}
