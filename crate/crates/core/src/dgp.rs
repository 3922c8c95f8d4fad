//! Data-generating processes used by the simulation studies.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::estimator::{ConditionalModel, Estimate};
use crate::residuals::InnovationSource;
use crate::rng::StreamRng;
use crate::series::TimeSeries;

pub const DEFAULT_BURN_IN: usize = 200;

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type SamplerFn = Arc<dyn Fn(&mut StreamRng) -> f64 + Send + Sync>;

/// Conditional mean and volatility of the true recursion.
#[derive(Clone)]
pub enum TrueModel {
    /// `X_t = log(X_{t-1}^2 + 1) + e_t`
    LogSquare,
    /// `X_t = sin(X_{t-1}) + e_t sqrt(0.5 + 0.25 X_{t-1}^2)`
    SinGarch,
    Custom { mean: ScalarFn, sd: ScalarFn },
}

#[derive(Clone)]
pub enum Innovation {
    StdNormal,
    /// `chi^2(3) - 3`, mean 0 and variance 6.
    ChiSq3Centered,
    /// `-1` or `+1` with equal probability.
    TwoPoint,
    Custom(SamplerFn),
}

impl fmt::Debug for TrueModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TrueModel::LogSquare => f.write_str("LogSquare"),
            TrueModel::SinGarch => f.write_str("SinGarch"),
            TrueModel::Custom { .. } => f.write_str("Custom"),
        }
    }
}

impl fmt::Debug for Innovation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Innovation::StdNormal => f.write_str("StdNormal"),
            Innovation::ChiSq3Centered => f.write_str("ChiSq3Centered"),
            Innovation::TwoPoint => f.write_str("TwoPoint"),
            Innovation::Custom(_) => f.write_str("Custom"),
        }
    }
}

impl Innovation {
    pub fn sample(&self, rng: &mut StreamRng) -> f64 {
        match self {
            Innovation::StdNormal => StandardNormal.sample(rng),
            Innovation::ChiSq3Centered => {
                ChiSquared::new(3.0).expect("3 degrees of freedom").sample(rng) - 3.0
            }
            Innovation::TwoPoint => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            Innovation::Custom(f) => f(rng),
        }
    }
}

impl InnovationSource for Innovation {
    fn draw(&self, rng: &mut StreamRng) -> f64 {
        self.sample(rng)
    }
}

#[derive(Clone, Debug)]
pub struct DgpSpec {
    pub model: TrueModel,
    pub innovation: Innovation,
    pub burn_in: usize,
}

impl DgpSpec {
    pub fn new(model: TrueModel, innovation: Innovation) -> Self {
        Self { model, innovation, burn_in: DEFAULT_BURN_IN }
    }

    /// Named preset: `model1-normal`, `model1-chisq` or `model2-normal`.
    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "model1-normal" => Ok(Self::new(TrueModel::LogSquare, Innovation::StdNormal)),
            "model1-chisq" => Ok(Self::new(TrueModel::LogSquare, Innovation::ChiSq3Centered)),
            "model2-normal" => Ok(Self::new(TrueModel::SinGarch, Innovation::StdNormal)),
            other => Err(Error::Config(format!("unknown data-generating process '{other}'"))),
        }
    }

    pub const PRESETS: [&'static str; 3] = ["model1-normal", "model1-chisq", "model2-normal"];

    /// Whether the true volatility is constant. Custom models are assumed not to be.
    pub fn is_homoscedastic(&self) -> bool {
        matches!(self.model, TrueModel::LogSquare)
    }

    pub fn true_mean(&self, x: f64) -> f64 {
        match &self.model {
            TrueModel::LogSquare => (x * x + 1.0).ln(),
            TrueModel::SinGarch => x.sin(),
            TrueModel::Custom { mean, .. } => mean(x),
        }
    }

    pub fn true_sd(&self, x: f64) -> f64 {
        match &self.model {
            TrueModel::LogSquare => 1.0,
            TrueModel::SinGarch => (0.5 + 0.25 * x * x).sqrt(),
            TrueModel::Custom { sd, .. } => sd(x),
        }
    }

    pub fn sample_innovation(&self, rng: &mut StreamRng) -> f64 {
        self.innovation.sample(rng)
    }

    #[inline]
    pub fn step(&self, x: f64, e: f64) -> f64 {
        self.true_mean(x) + self.true_sd(x) * e
    }

    /// `X_0 ~ Uniform(-1, 1)`, iterated `burn_in + t` times; the last `t + 1` values are kept.
    pub fn generate_series(&self, t: usize, rng: &mut StreamRng) -> Result<TimeSeries> {
        if t < 1 {
            return Err(Error::InvalidParameter("series length T must be at least 1".into()));
        }
        let mut x: f64 = rng.random_range(-1.0..1.0);
        for _ in 0..self.burn_in {
            x = self.step(x, self.sample_innovation(rng));
        }
        let mut out = Vec::with_capacity(t + 1);
        out.push(x);
        for _ in 0..t {
            x = self.step(x, self.sample_innovation(rng));
            out.push(x);
        }
        Ok(TimeSeries::new(out))
    }
}

impl ConditionalModel for DgpSpec {
    fn estimate(&self, x: f64) -> Result<Estimate> {
        Ok(Estimate { mean: self.true_mean(x), sd: self.true_sd(x) })
    }
}
