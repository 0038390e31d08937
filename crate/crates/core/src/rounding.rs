//! Unbiased randomized rounding onto the grid `γZ^d` and its norm-capped
//! conditional variant.
//!
//! Internally everything happens in grid units: a real vector `x` is divided by
//! `γ` once, rounded against `Z^d`, and only multiplied back at the boundary.

use rand::{Rng, RngCore};

use crate::error::{invalid, Error, Result};

/// Attempts allowed to [`conditional_round`] before it gives up.
pub const ROUNDING_RETRY_CAP: u32 = 1000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundingParams {
    gamma: f64,
    beta: f64,
    dim: usize,
}

impl RoundingParams {
    pub fn new(gamma: f64, beta: f64, dim: usize) -> Result<Self> {
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(invalid("gamma", format!("must be positive, got {gamma}")));
        }
        if !(0.0..1.0).contains(&beta) {
            return Err(invalid("beta", format!("must lie in [0, 1), got {beta}")));
        }
        if dim == 0 {
            return Err(invalid("d", "must be positive"));
        }
        Ok(Self { gamma, beta, dim })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

/// Which arm of the sensitivity minimum was smaller.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SensitivityBranch {
    Conditional,
    WorstCase,
}

/// The l2 sensitivity of one client's rounded contribution.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct SensitivityBound {
    /// `Δ₂` in original units.
    pub delta2: f64,
    /// `Δ₂ / γ`, the radius the conditional rounding enforces.
    pub delta2_grid: f64,
    pub branch: SensitivityBranch,
}

impl SensitivityBound {
    /// A sensitivity supplied directly rather than derived from `(c, γ, β, d)`.
    pub fn fixed(delta2: f64, gamma: f64) -> Result<Self> {
        if !(delta2.is_finite() && delta2 > 0.0) {
            return Err(invalid("delta2", format!("must be positive, got {delta2}")));
        }
        Ok(Self {
            delta2,
            delta2_grid: delta2 / gamma,
            branch: SensitivityBranch::WorstCase,
        })
    }
}

/// `Δ₂ = sqrt(min{c² + γ²d/4 + sqrt(2 ln(1/β)) γ (c + γ√d/2), (c + γ√d)²})`.
///
/// With `β = 0` the rounding is unconditional and only the worst case applies.
///
/// ```
/// use ddgauss::rounding::{delta2_bound, RoundingParams};
/// let p = RoundingParams::new(1.0, 0.0, 1).unwrap();
/// assert_eq!(delta2_bound(1.0, &p).unwrap().delta2, 2.0);
/// ```
pub fn delta2_bound(c: f64, params: &RoundingParams) -> Result<SensitivityBound> {
    if !(c.is_finite() && c > 0.0) {
        return Err(invalid("c", format!("must be positive, got {c}")));
    }
    // Grid units: c/γ and √d.
    let cg = c / params.gamma;
    let sd = (params.dim as f64).sqrt();
    let worst = (cg + sd) * (cg + sd);
    let conditional = if params.beta > 0.0 {
        let lam = (2.0 * (1.0 / params.beta).ln()).sqrt();
        cg * cg + 0.25 * params.dim as f64 + lam * (cg + 0.5 * sd)
    } else {
        f64::INFINITY
    };
    let (sq, branch) = if conditional < worst {
        (conditional, SensitivityBranch::Conditional)
    } else {
        (worst, SensitivityBranch::WorstCase)
    };
    let delta2_grid = sq.sqrt();
    Ok(SensitivityBound {
        delta2: delta2_grid * params.gamma,
        delta2_grid,
        branch,
    })
}

/// High-probability l1 bound on a rounded vector:
/// `‖x‖₁ + γ sqrt(d ln(1/β) / 2)`, or the worst case `‖x‖₁ + γd` when `β = 0`.
///
/// Only the three-branch privacy bound consumes this.
pub fn l1_norm_bound(x_l1: f64, params: &RoundingParams) -> f64 {
    let d = params.dim as f64;
    if params.beta > 0.0 {
        x_l1 + params.gamma * (0.5 * d * (1.0 / params.beta).ln()).sqrt().min(d)
    } else {
        x_l1 + params.gamma * d
    }
}

/// Rounds each grid-unit coordinate to one of its two neighbouring integers
/// with the probabilities that keep the mean exact.
pub fn round_to_grid<R: RngCore + ?Sized>(x_grid: &[f64], rng: &mut R) -> Vec<i64> {
    x_grid
        .iter()
        .map(|&v| {
            let lo = v.floor();
            let frac = v - lo;
            let up = rng.random::<f64>() < frac;
            lo as i64 + up as i64
        })
        .collect()
}

/// `R_γ(x)` in original units.
pub fn randomized_round<R: RngCore + ?Sized>(x: &[f64], gamma: f64, rng: &mut R) -> Result<Vec<f64>> {
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(invalid("gamma", format!("must be positive, got {gamma}")));
    }
    let scaled: Vec<f64> = x.iter().map(|v| v / gamma).collect();
    Ok(round_to_grid(&scaled, rng)
        .into_iter()
        .map(|z| z as f64 * gamma)
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalRounding {
    /// The accepted vector in grid units.
    pub grid: Vec<i64>,
    /// Rejected attempts before the accepted one.
    pub retries: u32,
}

/// Squared l2 norm of an integer vector, exactly.
pub fn grid_norm_sq(z: &[i64]) -> i128 {
    z.iter().map(|&v| (v as i128) * (v as i128)).sum()
}

/// Randomized rounding of a grid-unit vector, repeated until its l2 norm is
/// at most `Δ₂/γ`.
///
/// The caller must already have clipped and rescaled `x_grid` so that
/// `‖x_grid‖₂ ≤ c/γ`.
pub fn conditional_round<R: RngCore + ?Sized>(
    x_grid: &[f64],
    c: f64,
    params: &RoundingParams,
    rng: &mut R,
) -> Result<ConditionalRounding> {
    if x_grid.len() != params.dim {
        return Err(Error::DimensionMismatch {
            expected: params.dim,
            actual: x_grid.len(),
        });
    }
    let limit = c / params.gamma;
    let norm = x_grid.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > limit * (1.0 + 1e-9) {
        return Err(invalid(
            "x",
            format!("grid-unit norm {norm} exceeds c/gamma = {limit}"),
        ));
    }
    if params.beta == 0.0 {
        return Ok(ConditionalRounding {
            grid: round_to_grid(x_grid, rng),
            retries: 0,
        });
    }
    let bound = delta2_bound(c, params)?;
    let cap = bound.delta2_grid * bound.delta2_grid;
    for attempt in 0..ROUNDING_RETRY_CAP {
        let z = round_to_grid(x_grid, rng);
        if grid_norm_sq(&z) as f64 <= cap {
            return Ok(ConditionalRounding {
                grid: z,
                retries: attempt,
            });
        }
    }
    Err(Error::RoundingRetryCap {
        attempts: ROUNDING_RETRY_CAP,
        acceptance_rate: 0.0,
    })
}
