use thiserror::Error;

/// Errors produced by the mechanism, the accountant and the experiment harness.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("length {0} is not a power of two")]
    NotPowerOfTwo(usize),

    #[error("discrete Gaussian sampler gave up after {0} rejections")]
    SamplerRetryCap(u64),

    #[error(
        "conditional rounding exceeded {attempts} attempts \
         (empirical acceptance rate {acceptance_rate:.3e}); check beta and gamma"
    )]
    RoundingRetryCap { attempts: u32, acceptance_rate: f64 },

    #[error("tolerance {requested:e} not achievable at radius {radius}: tail mass is {achievable_tail:e}")]
    ToleranceUnachievable {
        requested: f64,
        radius: i64,
        achievable_tail: f64,
    },

    #[error("support radius {radius} too small, need at least {required}")]
    SupportTooSmall { radius: i64, required: i64 },

    #[error(
        "target epsilon {target} unachievable: epsilon ranges over [{eps_at_cap:e}, {eps_at_floor}] \
         for sigma in [{sigma_floor:e}, {sigma_cap:e}]"
    )]
    EpsilonUnachievable {
        target: f64,
        eps_at_floor: f64,
        eps_at_cap: f64,
        sigma_floor: f64,
        sigma_cap: f64,
    },

    #[error("no feasible granularity: smallest achievable k*s/(m/2) ratio is {min_ratio:.6}")]
    InfeasibleGranularity { min_ratio: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
