//! Local-constant (Nadaraya–Watson) estimators of the conditional mean and
//! volatility of a first-order autoregression, with truncation.
//!
//! Transitions `(X_{t-1}, X_t)` are stored sorted by predictor so that a
//! compactly supported kernel only visits the pairs inside its window. Sums
//! always run in that sorted order; a delete-one estimator therefore produces
//! exactly the same floating-point result as an estimator built from the
//! reduced pair set.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::series::{sample_sd, TimeSeries};

/// Volatility floor shared by the real and bootstrap worlds.
pub const DEFAULT_SD_FLOOR: f64 = 0.01;

/// Clamp limits applied to the raw estimators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationBounds {
    /// `C_m`: the mean estimate is clamped to `[-mean_cap, mean_cap]`.
    pub mean_cap: f64,
    /// `c_sigma`
    pub sd_floor: f64,
    /// `C_sigma`
    pub sd_cap: f64,
}

/// Which world a set of truncation bounds is built for.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum World<'a> {
    Real,
    /// Bootstrap world; carries the bounds used on the observed sample.
    Bootstrap { real: &'a TruncationBounds },
}

impl TruncationBounds {
    pub fn new(mean_cap: f64, sd_floor: f64, sd_cap: f64) -> Result<Self> {
        if !(mean_cap >= 0.0) {
            return Err(Error::InvalidParameter(format!("mean cap must be >= 0, got {mean_cap}")));
        }
        if !(sd_floor > 0.0) || !(sd_cap >= sd_floor) {
            return Err(Error::InvalidParameter(format!(
                "volatility bounds must satisfy 0 < floor <= cap, got ({sd_floor}, {sd_cap})"
            )));
        }
        Ok(Self { mean_cap, sd_floor, sd_cap })
    }

    /// Bounds that never bind except for the volatility floor.
    pub fn wide() -> Self {
        Self { mean_cap: f64::INFINITY, sd_floor: f64::MIN_POSITIVE, sd_cap: f64::INFINITY }
    }

    /// Default data-driven bounds.
    ///
    /// Real world: `C_m = 5 max|x|`, `c_sigma = 0.01`, `C_sigma = 2 sd(x)`.
    /// Bootstrap world: `C_m* = min(2 C_m, 5 max|x*|)` and
    /// `C_sigma* = min(4 sd(x), 2 sd(x*))`, where `4 sd(x) = 2 C_sigma`.
    /// A cap that would fall below the floor is raised to the floor.
    pub fn from_sample(sample: &TimeSeries, world: World<'_>) -> Result<Self> {
        let max_abs = sample.max_abs()?;
        let sd = sample.sd()?;
        let (mean_cap, sd_cap) = match world {
            World::Real => (5.0 * max_abs, 2.0 * sd),
            World::Bootstrap { real } => {
                ((2.0 * real.mean_cap).min(5.0 * max_abs), (2.0 * real.sd_cap).min(2.0 * sd))
            }
        };
        Ok(Self { mean_cap, sd_floor: DEFAULT_SD_FLOOR, sd_cap: sd_cap.max(DEFAULT_SD_FLOOR) })
    }

    #[inline]
    pub fn truncate_mean(&self, v: f64) -> f64 {
        v.clamp(-self.mean_cap, self.mean_cap)
    }

    #[inline]
    pub fn truncate_sd(&self, v: f64) -> f64 {
        v.clamp(self.sd_floor, self.sd_cap)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Pair {
    x: f64,
    y: f64,
    /// Transition index `t` of the pair `(X_{t-1}, X_t)`, starting at 1.
    t: usize,
}

/// Transitions sorted (stably) by predictor.
#[derive(Debug, Clone)]
pub(crate) struct PairSet {
    pairs: Vec<Pair>,
}

impl PairSet {
    fn from_pairs(iter: impl IntoIterator<Item = (f64, f64)>) -> Self {
        let mut pairs: Vec<Pair> =
            iter.into_iter().enumerate().map(|(i, (x, y))| Pair { x, y, t: i + 1 }).collect();
        pairs.sort_by(|a, b| a.x.total_cmp(&b.x));
        Self { pairs }
    }

    pub(crate) fn from_series(sample: &TimeSeries) -> Self {
        Self::from_pairs(sample.pairs())
    }

    pub(crate) fn len(&self) -> usize {
        self.pairs.len()
    }

    pub(crate) fn predictor(&self, pos: usize) -> f64 {
        self.pairs[pos].x
    }

    pub(crate) fn target(&self, pos: usize) -> f64 {
        self.pairs[pos].y
    }

    fn window(&self, kernel: Kernel, h: f64, x: f64) -> (usize, usize) {
        match kernel.support_radius() {
            Some(r) => {
                let lo = self.pairs.partition_point(|p| p.x <= x - r * h);
                let hi = self.pairs.partition_point(|p| p.x < x + r * h);
                (lo, hi.max(lo))
            }
            None => (0, self.pairs.len()),
        }
    }

    /// Kernel-weighted average of `value(pos)` at `x`, skipping position `skip`.
    #[inline]
    fn smooth<F>(&self, kernel: Kernel, h: f64, x: f64, skip: Option<usize>, mut value: F) -> Result<f64>
    where
        F: FnMut(usize) -> Result<f64>,
    {
        let (lo, hi) = self.window(kernel, h, x);
        let mut num = 0.0;
        let mut den = 0.0;
        for pos in lo..hi {
            if Some(pos) == skip {
                continue;
            }
            let w = kernel.eval((x - self.pairs[pos].x) / h);
            if w == 0.0 {
                continue;
            }
            num += w * value(pos)?;
            den += w;
        }
        if den > 0.0 {
            Ok(num / den)
        } else {
            Err(Error::ZeroDenominator { x })
        }
    }

    pub(crate) fn weighted_mean(&self, kernel: Kernel, h: f64, x: f64, skip: Option<usize>) -> Result<f64> {
        self.smooth(kernel, h, x, skip, |pos| Ok(self.pairs[pos].y))
    }
}

/// Kernel and bandwidths used to build an [`EstimatedModel`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub kernel: Kernel,
    /// Bandwidth of the mean estimator.
    pub mean_bandwidth: f64,
    /// Bandwidth used to smooth squared mean-residuals into the variance estimate.
    pub var_bandwidth: f64,
    /// Replace the local variance estimate by one global constant.
    pub homoscedastic: bool,
}

impl FitOptions {
    pub fn new(kernel: Kernel, mean_bandwidth: f64, var_bandwidth: f64, homoscedastic: bool) -> Self {
        Self { kernel, mean_bandwidth, var_bandwidth, homoscedastic }
    }

    fn validate(&self) -> Result<()> {
        for (name, h) in [("mean", self.mean_bandwidth), ("variance", self.var_bandwidth)] {
            if !(h > 0.0) || !h.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} bandwidth must be positive, got {h}")));
            }
        }
        Ok(())
    }
}

/// Truncated local-constant estimate at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub sd: f64,
}

/// Conditional mean and volatility of a first-order recursion
/// `X_t = m(X_{t-1}) + sigma(X_{t-1}) e_t`.
pub trait ConditionalModel: Sync {
    fn estimate(&self, x: f64) -> Result<Estimate>;
}

impl ConditionalModel for EstimatedModel {
    fn estimate(&self, x: f64) -> Result<Estimate> {
        self.eval(x)
    }
}

/// Truncated Nadaraya–Watson estimators `m_hat` and `sigma_hat` closed over a sample.
#[derive(Debug, Clone)]
pub struct EstimatedModel {
    options: FitOptions,
    bounds: TruncationBounds,
    pairs: Arc<PairSet>,
    /// Sorted position of the deleted pair, if any.
    excluded: Option<usize>,
    /// Untruncated mean at each stored predictor; absent for delete-one models.
    fitted: Option<Arc<Vec<f64>>>,
    /// Raw global variance for the homoscedastic variant.
    constant_var: Option<f64>,
}

impl EstimatedModel {
    /// Fits on the transitions of `sample`.
    pub fn fit(sample: &TimeSeries, options: FitOptions, bounds: TruncationBounds) -> Result<Self> {
        if sample.len() < 2 {
            return Err(Error::SampleTooShort { required: 2, actual: sample.len() });
        }
        Self::from_pairs(sample.pairs(), options, bounds)
    }

    /// Fits on explicit `(predictor, target)` pairs. Pair `i` (zero-based) gets transition index `i + 1`.
    pub fn from_pairs(
        pairs: impl IntoIterator<Item = (f64, f64)>,
        options: FitOptions,
        bounds: TruncationBounds,
    ) -> Result<Self> {
        options.validate()?;
        let pairs = PairSet::from_pairs(pairs);
        if pairs.len() == 0 {
            return Err(Error::EmptySample);
        }
        let mut model = Self {
            options,
            bounds,
            pairs: Arc::new(pairs),
            excluded: None,
            fitted: None,
            constant_var: None,
        };
        let fitted = (0..model.pairs.len()).map(|pos| model.nw_mean(model.pairs.predictor(pos))).collect::<Result<Vec<_>>>()?;
        model.fitted = Some(Arc::new(fitted));
        model.constant_var = model.homoscedastic_var()?;
        Ok(model)
    }

    /// Delete-`X_t` estimator: same bandwidths and bounds, transition `t` (1-based) left out.
    pub fn delete_one(&self, t: usize) -> Result<Self> {
        if self.excluded.is_some() {
            return Err(Error::InvalidParameter("model already has a deleted transition".into()));
        }
        if self.pairs.len() < 2 {
            return Err(Error::SampleTooShort { required: 2, actual: self.pairs.len() });
        }
        let pos = self
            .pairs
            .pairs
            .iter()
            .position(|p| p.t == t)
            .ok_or_else(|| Error::InvalidParameter(format!("no transition with index {t}")))?;
        let mut model = Self {
            options: self.options,
            bounds: self.bounds,
            pairs: Arc::clone(&self.pairs),
            excluded: Some(pos),
            fitted: self.fitted.clone(),
            constant_var: None,
        };
        model.constant_var = model.homoscedastic_var()?;
        Ok(model)
    }

    /// Homoscedastic model whose constant variance is taken from `other`.
    pub fn with_variance_of(&self, other: &EstimatedModel) -> Result<Self> {
        match (self.constant_var, other.constant_var) {
            (Some(_), Some(v)) => Ok(Self { constant_var: Some(v), ..self.clone() }),
            _ => Err(Error::InvalidParameter("both models must be homoscedastic".into())),
        }
    }

    /// Same data and bandwidths under different truncation bounds.
    pub fn with_bounds(&self, bounds: TruncationBounds) -> Self {
        Self { bounds, ..self.clone() }
    }

    pub fn options(&self) -> &FitOptions {
        &self.options
    }

    pub fn bounds(&self) -> &TruncationBounds {
        &self.bounds
    }

    pub fn excluded_index(&self) -> Option<usize> {
        self.excluded.map(|pos| self.pairs.pairs[pos].t)
    }

    pub fn is_homoscedastic(&self) -> bool {
        self.options.homoscedastic
    }

    /// Number of transitions the estimator averages over.
    pub fn effective_len(&self) -> usize {
        self.pairs.len() - usize::from(self.excluded.is_some())
    }

    /// Untruncated mean estimate `m_tilde(x)`.
    pub fn nw_mean(&self, x: f64) -> Result<f64> {
        self.pairs.weighted_mean(self.options.kernel, self.options.mean_bandwidth, x, self.excluded)
    }

    fn fitted_mean(&self, pos: usize) -> Result<f64> {
        match &self.fitted {
            Some(f) => Ok(f[pos]),
            None => self.nw_mean(self.pairs.predictor(pos)),
        }
    }

    fn squared_residual(&self, pos: usize) -> Result<f64> {
        let r = self.pairs.target(pos) - self.fitted_mean(pos)?;
        Ok(r * r)
    }

    fn homoscedastic_var(&self) -> Result<Option<f64>> {
        if !self.options.homoscedastic {
            return Ok(None);
        }
        let residuals = (0..self.pairs.len())
            .filter(|&pos| Some(pos) != self.excluded)
            .map(|pos| Ok(self.pairs.target(pos) - self.fitted_mean(pos)?))
            .collect::<Result<Vec<_>>>()?;
        let sd = sample_sd(&residuals).unwrap_or(0.0);
        Ok(Some(sd * sd))
    }

    /// Untruncated variance estimate `sigma_tilde(x)`: local average of squared mean-residuals.
    pub fn nw_var(&self, x: f64) -> Result<f64> {
        if let Some(v) = self.constant_var {
            return Ok(v);
        }
        let v = self.pairs.smooth(self.options.kernel, self.options.var_bandwidth, x, self.excluded, |pos| {
            self.squared_residual(pos)
        })?;
        Ok(v.max(0.0))
    }

    /// Truncated mean `m_hat(x)`.
    pub fn mean(&self, x: f64) -> Result<f64> {
        Ok(self.bounds.truncate_mean(self.nw_mean(x)?))
    }

    /// Truncated volatility `sigma_hat(x)`, the clamped square root of `sigma_tilde(x)`.
    pub fn sd(&self, x: f64) -> Result<f64> {
        Ok(self.bounds.truncate_sd(self.nw_var(x)?.sqrt()))
    }

    pub fn eval(&self, x: f64) -> Result<Estimate> {
        Ok(Estimate { mean: self.mean(x)?, sd: self.sd(x)? })
    }
}
