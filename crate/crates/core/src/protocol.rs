//! The client encoder, the server decoder and a one-round orchestrator.
//!
//! A client pads its vector to a power of two, clips it to norm `c`, rescales
//! to grid units, flattens, rounds conditionally onto `Z^d`, adds discrete
//! Gaussian noise of scale `σ/γ` and reduces mod `m`. The server only ever
//! sees the modular sum, which it centers, rescales and unflattens.
//!
//! [`server_decode`] accepts nothing but an [`AggregatedResidues`], so a
//! single client's message cannot be decoded by mistake:
//!
//! ```compile_fail
//! use ddgauss::protocol::{client_encode, server_decode};
//! # fn f(cfg: &ddgauss::protocol::ProtocolConfig, xi: &ddgauss::flatten::SignVector) {
//! let mut rng = ddgauss::seeds::client_stream(0, 0, 0);
//! let (msg, _) = client_encode(&[1.0], cfg, xi, &mut rng).unwrap();
//! server_decode(&msg, cfg, xi).unwrap();
//! # }
//! ```

use rand::RngCore;
use rayon::prelude::*;
use serde::Serialize;

use crate::dgauss::{DiscreteGaussian, NoiseScale};
use crate::error::{invalid, Error, Result};
use crate::flatten::{flatten, unflatten, PaddedDim, SignVector};
use crate::modular::{center, mod_reduce, secagg_sum, AggregatedResidues, Modulus, ResidueVector};
use crate::rounding::{conditional_round, RoundingParams};
use crate::seeds;

/// Public parameters of one aggregation round, before validation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProtocolParams {
    pub n: usize,
    pub d: usize,
    pub c: f64,
    pub gamma: f64,
    pub modulus: Modulus,
    /// Per-client noise scale in original units.
    pub sigma: f64,
    pub beta: f64,
    pub master_seed: u64,
    pub round: u64,
}

/// Validated round parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProtocolConfig {
    params: ProtocolParams,
    dim: PaddedDim,
    #[serde(skip)]
    noise: Option<NoiseScale>,
}

impl ProtocolConfig {
    /// Requires `σ/γ ≥ 1/2`.
    pub fn new(params: ProtocolParams) -> Result<Self> {
        let dim = Self::validate_common(&params)?;
        let noise = NoiseScale::for_protocol(params.sigma / params.gamma)?;
        Ok(Self {
            params,
            dim,
            noise: Some(noise),
        })
    }

    /// A configuration that adds no noise at all, for isolating the rounding
    /// and wraparound error. Not private.
    pub fn noiseless(mut params: ProtocolParams) -> Result<Self> {
        params.sigma = 0.0;
        let dim = Self::validate_common(&params)?;
        Ok(Self {
            params,
            dim,
            noise: None,
        })
    }

    fn validate_common(p: &ProtocolParams) -> Result<PaddedDim> {
        if p.n == 0 {
            return Err(invalid("n", "must be positive"));
        }
        if !(p.c.is_finite() && p.c > 0.0) {
            return Err(invalid("c", format!("must be positive, got {}", p.c)));
        }
        RoundingParams::new(p.gamma, p.beta, 1)?;
        PaddedDim::new(p.d)
    }

    pub fn params(&self) -> &ProtocolParams {
        &self.params
    }

    pub fn dim(&self) -> PaddedDim {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.params.n
    }

    pub fn gamma(&self) -> f64 {
        self.params.gamma
    }

    pub fn sigma(&self) -> f64 {
        self.params.sigma
    }

    pub fn modulus(&self) -> Modulus {
        self.params.modulus
    }

    pub fn rounding(&self) -> RoundingParams {
        RoundingParams::new(self.params.gamma, self.params.beta, self.dim.padded())
            .expect("validated at construction")
    }

    /// The public sign vector every party derives from the master seed.
    pub fn sign_vector(&self) -> SignVector {
        SignVector::from_seed(self.params.master_seed, self.dim.padded())
            .expect("padded length is a power of two")
    }
}

fn l2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Clip to norm `c` and divide by `γ`.
fn clip_and_rescale(x: &[f64], c: f64, gamma: f64) -> Vec<f64> {
    let norm = l2(x);
    let factor = if norm > c { c / norm } else { 1.0 } / gamma;
    x.iter().map(|v| v * factor).collect()
}

/// The noisy grid vector before modular reduction, with the rounding retries.
fn encode_unreduced<R: RngCore + ?Sized>(
    x: &[f64],
    cfg: &ProtocolConfig,
    xi: &SignVector,
    rng: &mut R,
) -> Result<(Vec<i64>, u32)> {
    if xi.len() != cfg.dim.padded() {
        return Err(Error::DimensionMismatch {
            expected: cfg.dim.padded(),
            actual: xi.len(),
        });
    }
    let padded = cfg.dim.pad(x)?;
    let scaled = clip_and_rescale(&padded, cfg.params.c, cfg.params.gamma);
    let flat = flatten(&scaled, xi)?;
    let rounded = conditional_round(&flat, cfg.params.c, &cfg.rounding(), rng)?;
    let mut z = rounded.grid;
    if let Some(noise) = cfg.noise {
        let sampler = DiscreteGaussian::new(noise);
        for v in z.iter_mut() {
            *v += sampler.sample(rng)?;
        }
    }
    Ok((z, rounded.retries))
}

/// One client's message `z ∈ Z_m^d` and the number of rounding retries.
pub fn client_encode<R: RngCore + ?Sized>(
    x: &[f64],
    cfg: &ProtocolConfig,
    xi: &SignVector,
    rng: &mut R,
) -> Result<(ResidueVector, u32)> {
    let (z, retries) = encode_unreduced(x, cfg, xi, rng)?;
    Ok((mod_reduce(&z, cfg.params.modulus), retries))
}

/// Estimate of `Σ xᵢ` from the modular sum.
pub fn server_decode(zbar: &AggregatedResidues, cfg: &ProtocolConfig, xi: &SignVector) -> Result<Vec<f64>> {
    let residues = zbar.residues();
    if residues.len() != cfg.dim.padded() {
        return Err(Error::DimensionMismatch {
            expected: cfg.dim.padded(),
            actual: residues.len(),
        });
    }
    if residues.modulus() != cfg.params.modulus {
        return Err(invalid("zbar", "modulus differs from the configuration"));
    }
    let gamma = cfg.params.gamma;
    let y: Vec<f64> = center(residues).into_iter().map(|v| v as f64 * gamma).collect();
    cfg.dim.truncate(unflatten(&y, xi)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundDiagnostics {
    /// Coordinates where the unreduced aggregate falls outside `{1-m/2, ..., m/2}`.
    pub wraparound_coords: usize,
    pub total_retries: u64,
    /// `‖xᵢ‖₂` of each input before clipping.
    pub per_client_norms: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundOutput {
    /// Estimate of the sum (not the mean) of the inputs.
    pub estimate: Vec<f64>,
    pub diagnostics: RoundDiagnostics,
}

/// Runs every client, the masked secure aggregation and the server.
pub fn run_round(inputs: &[Vec<f64>], cfg: &ProtocolConfig) -> Result<RoundOutput> {
    if inputs.len() != cfg.params.n {
        return Err(Error::DimensionMismatch {
            expected: cfg.params.n,
            actual: inputs.len(),
        });
    }
    let xi = cfg.sign_vector();
    let p = &cfg.params;
    let encoded: Vec<(Vec<i64>, u32)> = inputs
        .par_iter()
        .enumerate()
        .map(|(i, x)| {
            let mut rng = seeds::client_stream(p.master_seed, p.round, i as u64);
            encode_unreduced(x, cfg, &xi, &mut rng)
        })
        .collect::<Result<_>>()?;

    let d = cfg.dim.padded();
    let mut raw_sum = vec![0i128; d];
    for (z, _) in &encoded {
        for (s, &v) in raw_sum.iter_mut().zip(z) {
            *s += v as i128;
        }
    }
    let half = p.modulus.half() as i128;
    let wraparound_coords = raw_sum.iter().filter(|&&s| s > half || s <= -half).count();

    let messages: Vec<ResidueVector> = encoded.iter().map(|(z, _)| mod_reduce(z, p.modulus)).collect();
    let mut mask_rng = seeds::stream("ddgauss/secagg", p.master_seed, &[p.round]);
    let zbar = secagg_sum(&messages, true, &mut mask_rng)?;
    let estimate = server_decode(&zbar, cfg, &xi)?;

    Ok(RoundOutput {
        estimate,
        diagnostics: RoundDiagnostics {
            wraparound_coords,
            total_retries: encoded.iter().map(|(_, r)| *r as u64).sum(),
            per_client_norms: inputs.iter().map(|x| l2(x)).collect(),
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MseBound {
    /// Bound on `E‖estimate - Σxᵢ‖₂²`.
    pub bound: f64,
    /// Whether `σ̂² ≤ r²` holds; the bound is only guaranteed when it does.
    pub hypothesis_ok: bool,
    pub sigma_hat_sq: f64,
    /// Modular range half-width in original units, `γm/2`.
    pub r: f64,
}

/// Closed-form MSE guarantee for the sum estimate, with flattening constant 1:
///
/// ```text
/// σ̂² = S²/d + (γ²/4 + σ²) n,    r = γ m / 2
/// E‖est - Σx‖² ≤ dn/(1-β) · ( 2√2 r e^{-r²/4σ̂²} / sqrt(n (1-β)^{n-1})
///                             + sqrt(γ²/4 + β²γn/(1-β) + (1-β)σ²) )²
/// ```
///
/// where `S` bounds `‖Σxᵢ‖₂` and `d` is the padded dimension.
pub fn theoretical_mse_bound(cfg: &ProtocolConfig, sum_norm_bound: f64) -> MseBound {
    let p = &cfg.params;
    let (n, d) = (p.n as f64, cfg.dim.padded() as f64);
    let (gamma, sigma, beta) = (p.gamma, p.sigma, p.beta);
    let r = gamma * p.modulus.m() as f64 / 2.0;
    let sigma_hat_sq = sum_norm_bound * sum_norm_bound / d + (gamma * gamma / 4.0 + sigma * sigma) * n;
    let log_clip = (2.0 * 2f64.sqrt() * r).ln()
        - r * r / (4.0 * sigma_hat_sq)
        - 0.5 * (n.ln() + (n - 1.0) * (-beta).ln_1p());
    let clip = log_clip.exp();
    let base = (gamma * gamma / 4.0 + beta * beta * gamma * n / (1.0 - beta) + (1.0 - beta) * sigma * sigma).sqrt();
    MseBound {
        bound: d * n / (1.0 - beta) * (clip + base).powi(2),
        hypothesis_ok: sigma_hat_sq <= r * r,
        sigma_hat_sq,
        r,
    }
}
