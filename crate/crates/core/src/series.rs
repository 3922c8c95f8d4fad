use crate::error::{Error, Result};

/// Ordered real observations `X_0, ..., X_T`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Number of observations, i.e. `T + 1`.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Number of transitions `T` (one less than the number of observations).
    pub fn transitions(&self) -> usize {
        self.values.len().saturating_sub(1)
    }

    /// The conditioning value `X_T`.
    pub fn last(&self) -> Option<f64> {
        self.values.last().copied()
    }

    /// Iterator over `(X_{t-1}, X_t)` for `t = 1..=T`.
    pub fn pairs(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.values.windows(2).map(|w| (w[0], w[1]))
    }

    pub fn mean(&self) -> Result<f64> {
        mean(&self.values).ok_or(Error::EmptySample)
    }

    pub fn median(&self) -> Result<f64> {
        median(&self.values).ok_or(Error::EmptySample)
    }

    /// Sample standard deviation with the `n - 1` denominator; zero for a single value.
    pub fn sd(&self) -> Result<f64> {
        sample_sd(&self.values).ok_or(Error::EmptySample)
    }

    pub fn max_abs(&self) -> Result<f64> {
        if self.values.is_empty() {
            return Err(Error::EmptySample);
        }
        Ok(self.values.iter().fold(0.0_f64, |acc, v| acc.max(v.abs())))
    }
}

impl From<Vec<f64>> for TimeSeries {
    fn from(values: Vec<f64>) -> Self {
        Self::new(values)
    }
}

pub(crate) fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}

/// Midpoint median of the values.
pub(crate) fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Some(median_sorted(&sorted))
}

pub(crate) fn median_sorted(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

pub(crate) fn sample_sd(values: &[f64]) -> Option<f64> {
    let m = mean(values)?;
    if values.len() < 2 {
        return Some(0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    Some((ss / (values.len() - 1) as f64).sqrt())
}
