//! Forward-bootstrap prediction for nonparametric first-order autoregressions
//! `X_t = m(X_{t-1}) + sigma(X_{t-1}) e_t`.
//!
//! The conditional mean and volatility are estimated by truncated
//! Nadaraya–Watson smoothers. Future paths are simulated from the fitted
//! recursion with resampled fitted or predictive residuals. This gives L1/L2
//! point forecasts, quantile prediction intervals, and pertinent prediction
//! intervals from a double bootstrap over predictive roots. The [`bench`]
//! module runs Monte-Carlo studies comparing these against an oracle that
//! knows the true model.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bandwidth;
pub mod bench;
pub mod cli;
pub mod dgp;
pub mod error;
pub mod estimator;
pub mod forecast;
pub mod kernel;
pub mod residuals;
pub mod rng;
pub mod series;

pub use error::{Error, Result};
pub use series::TimeSeries;
