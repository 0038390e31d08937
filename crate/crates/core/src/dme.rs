//! Distributed mean estimation experiments.
//!
//! Each client holds a vector drawn uniformly from the radius-`c` sphere. For
//! every sweep point `(ε, B, k)` the harness picks `γ` and `σ` with
//! [`choose_gamma`], runs the protocol over several independent datasets, and
//! compares the mean-squared error of the mean estimate with a central
//! continuous Gaussian mechanism at the same zCDP `ρ = ε²/2`.

use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::accountant::{choose_gamma, CommBudget, NormMode};
use crate::error::{invalid, Result};
use crate::flatten::PaddedDim;
use crate::modular::Modulus;
use crate::protocol::{run_round, theoretical_mse_bound, ProtocolConfig, ProtocolParams};
use crate::seeds;

fn default_n() -> usize {
    100
}
fn default_d() -> usize {
    1024
}
fn default_c() -> f64 {
    10.0
}
fn default_eps() -> Vec<f64> {
    vec![4.0]
}
fn default_delta() -> f64 {
    1e-5
}
fn default_bits() -> Vec<u32> {
    vec![10, 12, 14, 16, 18, 20]
}
fn default_k() -> Vec<f64> {
    vec![2.0, 3.0, 4.0]
}
fn default_mode() -> NormMode {
    NormMode::Optimistic
}
fn default_trials() -> usize {
    10
}
fn default_beta() -> f64 {
    (-0.5f64).exp()
}

/// A fully resolved DME sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DmeConfig {
    pub n: usize,
    pub d: usize,
    pub c: f64,
    pub eps_targets: Vec<f64>,
    pub delta: f64,
    pub bit_widths: Vec<u32>,
    pub k_values: Vec<f64>,
    pub norm_mode: NormMode,
    pub trials: usize,
    pub beta: f64,
    pub master_seed: u64,
}

impl Default for DmeConfig {
    fn default() -> Self {
        Self {
            n: default_n(),
            d: default_d(),
            c: default_c(),
            eps_targets: default_eps(),
            delta: default_delta(),
            bit_widths: default_bits(),
            k_values: default_k(),
            norm_mode: default_mode(),
            trials: default_trials(),
            beta: default_beta(),
            master_seed: 0,
        }
    }
}

impl DmeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(invalid("n", "must be positive"));
        }
        if self.d == 0 {
            return Err(invalid("d", "must be positive"));
        }
        if !(self.c.is_finite() && self.c > 0.0) {
            return Err(invalid("c", format!("must be positive, got {}", self.c)));
        }
        if self.eps_targets.is_empty() || self.eps_targets.iter().any(|&e| !(e.is_finite() && e > 0.0)) {
            return Err(invalid("eps_targets", "must be a nonempty list of positive numbers"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(invalid("delta", format!("must lie in (0, 1), got {}", self.delta)));
        }
        if self.bit_widths.is_empty() {
            return Err(invalid("bit_widths", "must be nonempty"));
        }
        for &b in &self.bit_widths {
            Modulus::from_bits(b)?;
        }
        if self.k_values.is_empty() || self.k_values.iter().any(|&k| !(k.is_finite() && k > 0.0)) {
            return Err(invalid("k_values", "must be a nonempty list of positive numbers"));
        }
        if self.trials == 0 {
            return Err(invalid("trials", "must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.beta) {
            return Err(invalid("beta", format!("must lie in [0, 1), got {}", self.beta)));
        }
        Ok(())
    }

    /// Sweep points in output order: `ε`, then `B`, then `k`.
    pub fn points(&self) -> Vec<(f64, u32, f64)> {
        let mut out = Vec::new();
        for &e in &self.eps_targets {
            for &b in &self.bit_widths {
                for &k in &self.k_values {
                    out.push((e, b, k));
                }
            }
        }
        out
    }
}

/// `n` vectors uniform on the sphere of radius `c` in `R^d`.
pub fn sample_sphere<R: RngCore + ?Sized>(n: usize, d: usize, c: f64, rng: &mut R) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| loop {
            let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 {
                break v.into_iter().map(|x| x * c / norm).collect();
            }
        })
        .collect()
}

/// Noise scale of the central Gaussian baseline: `ε²/2`-zCDP at l2 sensitivity `c`.
pub fn baseline_sigma(eps_zcdp: f64, c: f64) -> f64 {
    c / eps_zcdp
}

/// `Σ clip_c(xᵢ) + N(0, (c/ε)² I)`.
pub fn gaussian_baseline<R: RngCore + ?Sized>(inputs: &[Vec<f64>], eps_zcdp: f64, c: f64, rng: &mut R) -> Vec<f64> {
    let d = inputs.first().map_or(0, Vec::len);
    let mut sum = vec![0.0; d];
    for x in inputs {
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let f = if norm > c { c / norm } else { 1.0 };
        for (s, v) in sum.iter_mut().zip(x) {
            *s += f * v;
        }
    }
    let sd = baseline_sigma(eps_zcdp, c);
    if sd.is_finite() && sd > 0.0 {
        for s in sum.iter_mut() {
            let z: f64 = StandardNormal.sample(rng);
            *s += sd * z;
        }
    }
    sum
}

/// Mean and 95% Student-t half-width of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanCi {
    pub mean: f64,
    /// `None` for a single trial.
    pub ci: Option<f64>,
}

pub fn mean_ci(xs: &[f64]) -> MeanCi {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return MeanCi { mean, ci: None };
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let t = StudentsT::new(0.0, 1.0, n - 1.0)
        .expect("positive degrees of freedom")
        .inverse_cdf(0.975);
    MeanCi {
        mean,
        ci: Some(t * (var / n).sqrt()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PointStatus {
    Ok,
    Infeasible,
    Failed,
}

impl PointStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            PointStatus::Ok => "ok",
            PointStatus::Infeasible => "infeasible",
            PointStatus::Failed => "failed",
        }
    }
}

/// One sweep point. Numeric fields are `None` when the point was infeasible.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DmeResult {
    pub eps: f64,
    pub delta: f64,
    pub bit_width: u32,
    pub k: f64,
    pub norm_mode: NormMode,
    pub n: usize,
    pub d: usize,
    pub c: f64,
    pub gamma: Option<f64>,
    pub sigma: Option<f64>,
    pub mse_ddgauss: Option<MeanCi>,
    pub mse_baseline: Option<MeanCi>,
    /// Wrapped coordinates over `trials × padded d`.
    pub wraparound_rate: Option<f64>,
    /// Fraction of trials with at least one wrapped coordinate.
    pub wraparound_round_rate: Option<f64>,
    /// Main-guarantee bound on the mean estimate's MSE.
    pub theory_bound: Option<f64>,
    pub theory_hypothesis_ok: Option<bool>,
    pub total_retries: u64,
    pub trial_mse_ddgauss: Vec<f64>,
    pub trial_mse_baseline: Vec<f64>,
    pub status: PointStatus,
    pub message: Option<String>,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

/// Seed indices identifying a sweep point by its parameters, so a point's
/// randomness does not depend on which other points share the sweep.
fn point_key(eps: f64, bits: u32, k: f64) -> [u64; 3] {
    [eps.to_bits(), bits as u64, k.to_bits()]
}

fn run_point(cfg: &DmeConfig, eps: f64, bits: u32, k: f64) -> DmeResult {
    let mut row = DmeResult {
        eps,
        delta: cfg.delta,
        bit_width: bits,
        k,
        norm_mode: cfg.norm_mode,
        n: cfg.n,
        d: cfg.d,
        c: cfg.c,
        gamma: None,
        sigma: None,
        mse_ddgauss: None,
        mse_baseline: None,
        wraparound_rate: None,
        wraparound_round_rate: None,
        theory_bound: None,
        theory_hypothesis_ok: None,
        total_retries: 0,
        trial_mse_ddgauss: Vec::new(),
        trial_mse_baseline: Vec::new(),
        status: PointStatus::Ok,
        message: None,
    };
    match fill_point(cfg, &mut row) {
        Ok(()) => {}
        Err(e @ crate::Error::InfeasibleGranularity { .. }) | Err(e @ crate::Error::EpsilonUnachievable { .. }) => {
            row.status = PointStatus::Infeasible;
            row.message = Some(e.to_string());
        }
        Err(e) => {
            row.status = PointStatus::Failed;
            row.message = Some(e.to_string());
        }
    }
    row
}

fn fill_point(cfg: &DmeConfig, row: &mut DmeResult) -> Result<()> {
    let dim = PaddedDim::new(cfg.d)?;
    let (n, d_pad) = (cfg.n as u64, dim.padded() as u64);
    let budget = CommBudget::new(row.bit_width, row.k, cfg.norm_mode)?;
    let choice = choose_gamma(&budget, row.eps, cfg.c, cfg.beta, n, d_pad, cfg.delta)?;
    row.gamma = Some(choice.gamma);
    row.sigma = Some(choice.sigma);
    let key = point_key(row.eps, row.bit_width, row.k);

    let n2 = (cfg.n * cfg.n) as f64;
    let mut wrapped = 0usize;
    let mut wrapped_rounds = 0usize;
    let mut bound = None;
    for trial in 0..cfg.trials {
        let params = ProtocolParams {
            n: cfg.n,
            d: cfg.d,
            c: cfg.c,
            gamma: choice.gamma,
            modulus: Modulus::from_bits(row.bit_width)?,
            sigma: choice.sigma,
            beta: cfg.beta,
            master_seed: seeds::derive_seed("ddgauss/protocol", cfg.master_seed, &[key[0], key[1], key[2], trial as u64]),
            round: 0,
        };
        let pcfg = ProtocolConfig::new(params)?;
        if bound.is_none() {
            bound = Some(theoretical_mse_bound(&pcfg, cfg.norm_mode.sum_norm_bound(cfg.c, n)));
        }

        let mut data_rng = seeds::stream("ddgauss/data", cfg.master_seed, &[trial as u64]);
        let inputs = sample_sphere(cfg.n, cfg.d, cfg.c, &mut data_rng);
        let mut truth = vec![0.0; cfg.d];
        for x in &inputs {
            for (t, v) in truth.iter_mut().zip(x) {
                *t += v;
            }
        }

        let out = run_round(&inputs, &pcfg)?;
        row.trial_mse_ddgauss.push(sq_dist(&out.estimate, &truth) / n2);
        wrapped += out.diagnostics.wraparound_coords;
        wrapped_rounds += (out.diagnostics.wraparound_coords > 0) as usize;
        row.total_retries += out.diagnostics.total_retries;

        let mut base_rng = seeds::stream("ddgauss/baseline", cfg.master_seed, &[key[0], key[1], key[2], trial as u64]);
        let base = gaussian_baseline(&inputs, row.eps, cfg.c, &mut base_rng);
        row.trial_mse_baseline.push(sq_dist(&base, &truth) / n2);
    }
    let bound = bound.expect("at least one trial");
    row.mse_ddgauss = Some(mean_ci(&row.trial_mse_ddgauss));
    row.mse_baseline = Some(mean_ci(&row.trial_mse_baseline));
    row.wraparound_rate = Some(wrapped as f64 / (cfg.trials as f64 * d_pad as f64));
    row.wraparound_round_rate = Some(wrapped_rounds as f64 / cfg.trials as f64);
    row.theory_bound = Some(bound.bound / n2);
    row.theory_hypothesis_ok = Some(bound.hypothesis_ok);
    Ok(())
}

/// Runs the whole sweep. Infeasible points are kept, flagged in `status`.
pub fn run_dme(cfg: &DmeConfig) -> Result<Vec<DmeResult>> {
    cfg.validate()?;
    Ok(cfg
        .points()
        .into_par_iter()
        .map(|(eps, bits, k)| run_point(cfg, eps, bits, k))
        .collect())
}
