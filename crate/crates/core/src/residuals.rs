//! Fitted and predictive residuals and the centered empirical innovation
//! distribution they define.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{ConditionalModel, EstimatedModel};
use crate::rng::StreamRng;
use crate::series::TimeSeries;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResidualKind {
    Fitted,
    Predictive,
}

impl ResidualKind {
    pub fn suffix(self) -> &'static str {
        match self {
            ResidualKind::Fitted => "f",
            ResidualKind::Predictive => "p",
        }
    }
}

impl std::str::FromStr for ResidualKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "f" | "fitted" => Ok(ResidualKind::Fitted),
            "p" | "predictive" => Ok(ResidualKind::Predictive),
            other => Err(Error::Config(format!("unknown residual kind '{other}'"))),
        }
    }
}

/// Standardized one-step residuals, ordered by transition index.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualSet {
    pub values: Vec<f64>,
    pub kind: ResidualKind,
    /// Transitions whose residual could not be formed (no kernel mass at `X_{t-1}`).
    pub guarded: Vec<usize>,
}

impl ResidualSet {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn standardized(x_prev: f64, x: f64, model: &impl ConditionalModel) -> Result<Option<f64>> {
    match model.estimate(x_prev) {
        Ok(est) => Ok(Some((x - est.mean) / est.sd)),
        Err(Error::ZeroDenominator { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

/// `(X_t - m_hat(X_{t-1})) / sigma_hat(X_{t-1})` for `t = 1..=T`.
pub fn fitted_residuals(sample: &TimeSeries, model: &impl ConditionalModel) -> Result<ResidualSet> {
    if sample.len() < 2 {
        return Err(Error::SampleTooShort { required: 2, actual: sample.len() });
    }
    let mut values = Vec::with_capacity(sample.transitions());
    let mut guarded = Vec::new();
    for (i, (x_prev, x)) in sample.pairs().enumerate() {
        match standardized(x_prev, x, model)? {
            Some(r) => values.push(r),
            None => guarded.push(i + 1),
        }
    }
    Ok(ResidualSet { values, kind: ResidualKind::Fitted, guarded })
}

/// Residuals of each transition against the estimator that leaves that transition out.
///
/// `template` must be fitted on `sample`; every delete-one fit reuses its
/// bandwidths and truncation bounds.
pub fn predictive_residuals(sample: &TimeSeries, template: &EstimatedModel) -> Result<ResidualSet> {
    if sample.len() < 4 {
        return Err(Error::SampleTooShort { required: 4, actual: sample.len() });
    }
    if template.effective_len() != sample.transitions() || template.excluded_index().is_some() {
        return Err(Error::InvalidParameter("template model was not fitted on this sample".into()));
    }
    let values = sample.values();
    let per_t: Vec<Option<f64>> = (1..=sample.transitions())
        .into_par_iter()
        .map(|t| {
            let loo = template.delete_one(t)?;
            standardized(values[t - 1], values[t], &loo)
        })
        .collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(per_t.len());
    let mut guarded = Vec::new();
    for (i, r) in per_t.into_iter().enumerate() {
        match r {
            Some(v) => out.push(v),
            None => guarded.push(i + 1),
        }
    }
    Ok(ResidualSet { values: out, kind: ResidualKind::Predictive, guarded })
}

/// Source of i.i.d. innovations for path simulation.
pub trait InnovationSource: Sync {
    fn draw(&self, rng: &mut StreamRng) -> f64;
}

impl InnovationSource for ResidualDist {
    fn draw(&self, rng: &mut StreamRng) -> f64 {
        ResidualDist::draw(self, rng)
    }
}

/// Centered empirical innovation distribution, optionally convolved with a Gaussian.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualDist {
    values: Vec<f64>,
    smoothing_sd: f64,
}

impl ResidualDist {
    /// Subtracts the mean and sorts.
    pub fn center(values: &[f64], smoothing_sd: f64) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyDistribution);
        }
        if !(smoothing_sd >= 0.0) || !smoothing_sd.is_finite() {
            return Err(Error::InvalidParameter(format!("smoothing sd must be >= 0, got {smoothing_sd}")));
        }
        let n = values.len() as f64;
        let m = values.iter().sum::<f64>() / n;
        let mut centered: Vec<f64> = values.iter().map(|v| v - m).collect();
        // second pass removes the rounding left by the first
        let m2 = centered.iter().sum::<f64>() / n;
        centered.iter_mut().for_each(|v| *v -= m2);
        centered.sort_by(f64::total_cmp);
        Ok(Self { values: centered, smoothing_sd })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn smoothing_sd(&self) -> f64 {
        self.smoothing_sd
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |a, v| a.max(v.abs()))
    }

    /// True when every draw is exactly zero.
    pub fn is_degenerate_at_zero(&self) -> bool {
        self.smoothing_sd == 0.0 && self.values.iter().all(|v| *v == 0.0)
    }

    #[inline]
    pub fn draw(&self, rng: &mut StreamRng) -> f64 {
        let v = self.values[rng.random_range(0..self.values.len())];
        if self.smoothing_sd > 0.0 {
            // sd validated in `center`
            v + Normal::new(0.0, self.smoothing_sd).expect("valid sd").sample(rng)
        } else {
            v
        }
    }

    pub fn sample_innovations(&self, n: usize, rng: &mut StreamRng) -> Vec<f64> {
        (0..n).map(|_| self.draw(rng)).collect()
    }
}

pub fn center(rs: &ResidualSet, smoothing_sd: f64) -> Result<ResidualDist> {
    ResidualDist::center(&rs.values, smoothing_sd)
}
