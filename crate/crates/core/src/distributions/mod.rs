//! Special functions and the two perturbation-sum distributions.

mod erf;
mod hypoexp;
pub mod sampling;

pub use erf::{erf, erf_inv, erfc};
pub use hypoexp::{
    hypoexp_cdf, hypoexp_pdf, WeightedExponentialSum, CLAMP_BAND, DEGENERACY_THRESHOLD, NUDGE,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DistributionError {
    #[error("argument {0} outside (-1, 1)")]
    OutOfDomain(f64),
    #[error("{coefficients} coefficients but {parameters} distribution parameters")]
    LengthMismatch {
        coefficients: usize,
        parameters: usize,
    },
    #[error("empty sum")]
    Empty,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("degenerate coefficients: ratios coincide or the closed form lost precision")]
    DegenerateCoefficients,
}

/// `Y = sum_j c_j Z_j` with independent `Z_j ~ N(m_j, s_j^2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedNormalSum {
    coefficients: Vec<f64>,
    means: Vec<f64>,
    stddevs: Vec<f64>,
}

impl WeightedNormalSum {
    pub fn new(
        coefficients: Vec<f64>,
        means: Vec<f64>,
        stddevs: Vec<f64>,
    ) -> Result<Self, DistributionError> {
        for len in [means.len(), stddevs.len()] {
            if len != coefficients.len() {
                return Err(DistributionError::LengthMismatch {
                    coefficients: coefficients.len(),
                    parameters: len,
                });
            }
        }
        if let Some(&s) = stddevs.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
            return Err(DistributionError::InvalidParameter(format!(
                "standard deviation {s} must be positive"
            )));
        }
        Ok(Self {
            coefficients,
            means,
            stddevs,
        })
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn stddevs(&self) -> &[f64] {
        &self.stddevs
    }
}

/// Mean and standard deviation of a weighted normal sum:
/// `m = sum c_j m_j`, `s = sqrt(sum (c_j s_j)^2)`.
pub fn weighted_normal_params(sum: &WeightedNormalSum) -> (f64, f64) {
    let m = sum
        .coefficients
        .iter()
        .zip(&sum.means)
        .map(|(c, m)| c * m)
        .sum();
    let v: f64 = sum
        .coefficients
        .iter()
        .zip(&sum.stddevs)
        .map(|(c, s)| (c * s).powi(2))
        .sum();
    (m, v.sqrt())
}

/// `erf_inv` as a `Result`, for callers that propagate errors.
pub fn try_erf_inv(p: f64) -> Result<f64, DistributionError> {
    erf_inv(p).ok_or(DistributionError::OutOfDomain(p))
}
