//! Bandwidth selection by leave-one-out cross-validation and the
//! under/over-smoothing strategies built on top of the selected value.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::PairSet;
use crate::kernel::Kernel;
use crate::series::{mean, sample_sd, TimeSeries};

pub const GRID_POINTS: usize = 25;
pub const GRID_LOW: f64 = 0.1;
pub const GRID_HIGH: f64 = 10.0;
pub const MIN_SELECTION_LEN: usize = 10;

/// How the estimation and bootstrap-generation bandwidths derive from `h_op`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Strategy {
    /// Under-smoothing with `g = h`.
    #[serde(rename = "B1")]
    Undersmooth,
    /// Optimal `h`, over-smoothed generation bandwidth `g`.
    #[serde(rename = "B2")]
    Oversmooth,
    /// Under-smoothed mean, optimal variance bandwidth.
    #[serde(rename = "opv")]
    OptimalVariance,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::Undersmooth => "B1",
            Strategy::Oversmooth => "B2",
            Strategy::OptimalVariance => "opv",
        }
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "b1" | "u" | "under" | "undersmooth" => Ok(Strategy::Undersmooth),
            "b2" | "o" | "over" | "oversmooth" => Ok(Strategy::Oversmooth),
            "opv" => Ok(Strategy::OptimalVariance),
            other => Err(Error::Config(format!("unknown bandwidth strategy '{other}'"))),
        }
    }
}

/// Smoothing multipliers applied to `h_op`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Multipliers {
    pub under: f64,
    pub over: f64,
}

impl Default for Multipliers {
    fn default() -> Self {
        Self { under: 0.5, over: 2.0 }
    }
}

/// Resolved bandwidth triple.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bandwidth {
    /// Mean-function bandwidth `h` used on the observed and bootstrap samples.
    pub h_est: f64,
    /// Mean-function bandwidth `g` of the model that generates bootstrap series.
    pub g_gen: f64,
    /// Variance-function bandwidth paired with `h_est`.
    pub h_var: f64,
    pub strategy: Strategy,
}

impl Bandwidth {
    /// Variance bandwidth of the generating model, `h_var` rescaled by `g / h`.
    pub fn g_var(&self) -> f64 {
        self.h_var * (self.g_gen / self.h_est)
    }
}

pub fn apply_strategy(h_op: f64, strategy: Strategy, homoscedastic: bool) -> Result<Bandwidth> {
    apply_strategy_with(h_op, strategy, homoscedastic, Multipliers::default())
}

pub fn apply_strategy_with(h_op: f64, strategy: Strategy, homoscedastic: bool, mult: Multipliers) -> Result<Bandwidth> {
    if !(h_op > 0.0) || !h_op.is_finite() {
        return Err(Error::InvalidParameter(format!("h_op must be positive, got {h_op}")));
    }
    let under = mult.under * h_op;
    let (h_est, g_gen, h_var) = match strategy {
        Strategy::Undersmooth => (under, under, under),
        Strategy::Oversmooth => (h_op, mult.over * h_op, h_op),
        // no variance function to smooth separately
        Strategy::OptimalVariance if homoscedastic => (under, under, under),
        Strategy::OptimalVariance => (under, under, h_op),
    };
    Ok(Bandwidth { h_est, g_gen, h_var, strategy })
}

/// Rule-of-thumb pilot `1.06 sd T^(-1/5)` computed on the predictors.
pub fn pilot_bandwidth(sample: &TimeSeries) -> Result<f64> {
    let n = sample.transitions();
    let predictors = &sample.values()[..n];
    let sd = sample_sd(predictors).ok_or(Error::EmptySample)?;
    if !(sd > 0.0) {
        return Err(Error::DegenerateSample);
    }
    Ok(1.06 * sd * (n as f64).powf(-0.2))
}

/// Logarithmic grid of [`GRID_POINTS`] candidates spanning `[0.1, 10] x pilot`.
pub fn candidate_grid(pilot: f64) -> Vec<f64> {
    let (lo, hi) = (GRID_LOW.ln(), GRID_HIGH.ln());
    let step = (hi - lo) / (GRID_POINTS - 1) as f64;
    (0..GRID_POINTS).map(|i| pilot * (lo + step * i as f64).exp()).collect()
}

/// Leave-one-out least-squares criterion for bandwidth `h`.
///
/// A left-out point with no kernel neighbours is predicted by the sample mean
/// of the observations, so the criterion stays finite for every `h`.
pub fn loocv_score(sample: &TimeSeries, kernel: Kernel, h: f64) -> Result<f64> {
    let pairs = PairSet::from_series(sample);
    let fallback = sample.mean()?;
    loocv_on(&pairs, kernel, h, fallback)
}

fn loocv_on(pairs: &PairSet, kernel: Kernel, h: f64, fallback: f64) -> Result<f64> {
    let n = pairs.len();
    if n == 0 {
        return Err(Error::EmptySample);
    }
    let mut sse = 0.0;
    for pos in 0..n {
        let fit = match pairs.weighted_mean(kernel, h, pairs.predictor(pos), Some(pos)) {
            Ok(v) => v,
            Err(Error::ZeroDenominator { .. }) => fallback,
            Err(e) => return Err(e),
        };
        let r = pairs.target(pos) - fit;
        sse += r * r;
    }
    Ok(sse / n as f64)
}

/// Cross-validated `h_op` over the default grid around the rule-of-thumb pilot.
pub fn select_bandwidth(sample: &TimeSeries, kernel: Kernel) -> Result<f64> {
    if sample.len() < MIN_SELECTION_LEN {
        return Err(Error::SampleTooShort { required: MIN_SELECTION_LEN, actual: sample.len() });
    }
    let grid = candidate_grid(pilot_bandwidth(sample)?);
    select_bandwidth_on_grid(sample, kernel, &grid)
}

/// Cross-validated bandwidth over an explicit grid; ties resolve to the earliest candidate.
pub fn select_bandwidth_on_grid(sample: &TimeSeries, kernel: Kernel, grid: &[f64]) -> Result<f64> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("empty bandwidth grid".into()));
    }
    if let Some(bad) = grid.iter().find(|h| !(**h > 0.0) || !h.is_finite()) {
        return Err(Error::InvalidParameter(format!("bandwidth candidates must be positive, got {bad}")));
    }
    if sample.len() < 2 {
        return Err(Error::SampleTooShort { required: 2, actual: sample.len() });
    }
    let pairs = PairSet::from_series(sample);
    let fallback = mean(sample.values()).ok_or(Error::EmptySample)?;
    let mut best = (f64::INFINITY, grid[0]);
    for &h in grid {
        let score = loocv_on(&pairs, kernel, h, fallback)?;
        if score < best.0 {
            best = (score, h);
        }
    }
    Ok(best.1)
}
