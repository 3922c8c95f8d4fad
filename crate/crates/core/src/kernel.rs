use serde::{Deserialize, Serialize};

const EPANECHNIKOV_PEAK: f64 = 0.75;
const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Smoothing kernel family. Both are symmetric probability densities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    /// `0.75 (1 - u^2)` on `|u| < 1`, zero elsewhere.
    #[default]
    Epanechnikov,
    Gaussian,
}

impl Kernel {
    #[inline]
    pub fn eval(self, u: f64) -> f64 {
        match self {
            Kernel::Epanechnikov => {
                let a = u.abs();
                if a >= 1.0 {
                    0.0
                } else {
                    EPANECHNIKOV_PEAK * (1.0 - u * u)
                }
            }
            Kernel::Gaussian => INV_SQRT_2PI * (-0.5 * u * u).exp(),
        }
    }

    /// Half-width of the support in units of the bandwidth, `None` for unbounded support.
    pub fn support_radius(self) -> Option<f64> {
        match self {
            Kernel::Epanechnikov => Some(1.0),
            Kernel::Gaussian => None,
        }
    }
}
