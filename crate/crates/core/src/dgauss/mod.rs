//! The discrete Gaussian distribution on the integers.
//!
//! [`DiscreteGaussian`] draws exact samples by rejection from a discrete
//! Laplace proposal using only integer arithmetic; [`exact_pmf`] and
//! [`convolution_max_log_ratio`] are the brute-force probability tools used to
//! check the sampler and the closeness of sums of discrete Gaussians.

mod convolution;
mod pmf;
mod sampler;

pub use convolution::{convolution_max_log_ratio, required_radius, ConvolutionCloseness};
pub use pmf::{exact_pmf, log_normalizer, TruncatedPmf};
pub use sampler::{sample_dgauss, DiscreteGaussian, SAMPLER_RETRY_CAP};

use crate::error::{invalid, Result};

/// Scale parameter `s` of the discrete Gaussian `N_Z(0, s^2)`.
///
/// The variance parameter `s^2` is stored as an `f64` and is the value every
/// routine treats as exact: the sampler targets exactly `N_Z(0, variance())`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseScale {
    sigma: f64,
    variance: f64,
}

/// Largest scale accepted; keeps the proposal parameter inside `u64`.
const MAX_SCALE: f64 = 1e15;

impl NoiseScale {
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0 && sigma <= MAX_SCALE) {
            return Err(invalid("s", format!("must be in (0, {MAX_SCALE:e}], got {sigma}")));
        }
        Ok(Self {
            sigma,
            variance: sigma * sigma,
        })
    }

    /// Builds the scale from `s^2` directly, so that e.g. `s^2 = 3` is exact.
    pub fn from_variance(variance: f64) -> Result<Self> {
        if !(variance.is_finite() && variance > 0.0 && variance <= MAX_SCALE * MAX_SCALE) {
            return Err(invalid("s^2", format!("must be positive and finite, got {variance}")));
        }
        Ok(Self {
            sigma: variance.sqrt(),
            variance,
        })
    }

    /// Protocol-facing constructor: sums of discrete Gaussians are only known
    /// to be close to a single discrete Gaussian for `s >= 1/2`.
    pub fn for_protocol(sigma: f64) -> Result<Self> {
        let scale = Self::new(sigma)?;
        if !scale.satisfies_sum_hypothesis() {
            return Err(invalid("s", format!("protocol noise needs s >= 1/2, got {sigma}")));
        }
        Ok(scale)
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn satisfies_sum_hypothesis(&self) -> bool {
        self.variance >= 0.25
    }
}
