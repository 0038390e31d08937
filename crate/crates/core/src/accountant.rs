//! Privacy accounting for the distributed discrete Gaussian mechanism.
//!
//! The mechanism satisfies `½ε²`-concentrated DP with
//!
//! ```text
//! τ = 10 Σ_{k=1}^{n-1} exp(-2π² (σ/γ)² k/(k+1))
//! ε = min{ sqrt(Δ₂²/(nσ²) + τd/2),  Δ₂/(√n σ) + τ√d }
//! ```
//!
//! Throughout, "epsilon" without qualification means this zCDP `ε`; the
//! approximate-DP value at a given `δ` is always named `eps_dp`.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::numeric::{golden_min, log_bisect, CompensatedSum};
use crate::rounding::{delta2_bound, RoundingParams, SensitivityBound};

/// Upper end of the noise search bracket, as a multiple of `c`.
pub const SIGMA_CAP_FACTOR: f64 = 1e6;
/// Relative tolerance of [`calibrate_sigma`].
pub const SIGMA_REL_TOL: f64 = 1e-9;
/// Relative tolerance of [`choose_gamma`].
pub const GAMMA_REL_TOL: f64 = 1e-6;
/// Points in the fallback scan of [`choose_gamma`].
pub const GAMMA_GRID_POINTS: usize = 64;

/// Attached to every report: composition here is plain zCDP addition.
pub const COMPOSITION_NOTE: &str =
    "composition assumes full participation; no subsampling amplification is applied";

fn check_positive(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(invalid(name, format!("must be positive and finite, got {v}")))
    }
}

/// The convolution penalty `τ` for `n` noise shares of grid scale `σ/γ`.
///
/// ```
/// let t = ddgauss::accountant::tau(3f64.sqrt(), 2).unwrap();
/// assert!((t - 10.0 * (-3.0 * std::f64::consts::PI.powi(2)).exp()).abs() < 1e-25);
/// ```
pub fn tau(sigma_grid: f64, n: u64) -> Result<f64> {
    if !(sigma_grid >= 0.5) || !sigma_grid.is_finite() {
        return Err(invalid(
            "sigma/gamma",
            format!("must be at least 1/2, got {sigma_grid}"),
        ));
    }
    if n < 2 {
        return Ok(0.0);
    }
    let a = 2.0 * PI * PI * sigma_grid * sigma_grid;
    let mut acc = CompensatedSum::new();
    for k in 1..n {
        let kf = k as f64;
        let term = (-a * kf / (kf + 1.0)).exp();
        acc.add(term);
        let remaining = (n - 1 - k) as f64;
        if remaining * term < 1e-30 * acc.value() {
            break;
        }
    }
    Ok(10.0 * acc.value())
}

/// Which arm of the epsilon minimum was active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EpsilonBranch {
    /// `sqrt(Δ₂²/(nσ²) + τd/2)`
    Sqrt,
    /// `sqrt(Δ₂²/(nσ²) + 2Δ₁τ/(√n σ) + τ²d)`, only with a supplied `Δ₁`
    L1,
    /// `Δ₂/(√n σ) + τ√d`
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpsilonBound {
    pub eps: f64,
    pub branch: EpsilonBranch,
    pub tau: f64,
    pub sqrt_branch: f64,
    pub linear_branch: f64,
    pub l1_branch: Option<f64>,
}

/// The zCDP `ε` of the summed mechanism.
///
/// With `delta1` given, the l1-sensitivity branch joins the minimum.
pub fn epsilon_zcdp(
    delta2: f64,
    sigma: f64,
    gamma: f64,
    n: u64,
    d: u64,
    delta1: Option<f64>,
) -> Result<EpsilonBound> {
    check_positive("delta2", delta2)?;
    check_positive("sigma", sigma)?;
    check_positive("gamma", gamma)?;
    if n == 0 || d == 0 {
        return Err(invalid("n, d", "must be positive"));
    }
    let t = tau(sigma / gamma, n)?;
    let (nf, df) = (n as f64, d as f64);
    let lin0 = delta2 / (nf.sqrt() * sigma);
    let sqrt_branch = (lin0 * lin0 + 0.5 * t * df).sqrt();
    let linear_branch = lin0 + t * df.sqrt();
    let l1_branch = match delta1 {
        Some(d1) => {
            check_positive("delta1", d1)?;
            if d1 > df.sqrt() * delta2 * (1.0 + 1e-12) {
                return Err(invalid("delta1", "must not exceed sqrt(d) * delta2"));
            }
            Some((lin0 * lin0 + 2.0 * d1 * t / (nf.sqrt() * sigma) + t * t * df).sqrt())
        }
        None => None,
    };
    let mut best = (sqrt_branch, EpsilonBranch::Sqrt);
    if linear_branch < best.0 {
        best = (linear_branch, EpsilonBranch::Linear);
    }
    if let Some(v) = l1_branch {
        if v < best.0 {
            best = (v, EpsilonBranch::L1);
        }
    }
    debug_assert!(best.0 <= sqrt_branch && best.0 <= linear_branch);
    debug_assert!(l1_branch.is_none_or(|v| best.0 <= v));
    Ok(EpsilonBound {
        eps: best.0,
        branch: best.1,
        tau: t,
        sqrt_branch,
        linear_branch,
        l1_branch,
    })
}

/// The conversion objective `ρα + ln(1/(αδ))/(α-1) + ln(1 - 1/α)`.
fn conversion_objective(rho: f64, log_inv_delta: f64, alpha: f64) -> f64 {
    rho * alpha + (log_inv_delta - alpha.ln()) / (alpha - 1.0) + (-1.0 / alpha).ln_1p()
}

/// `ρ + 2 sqrt(ρ ln(1/δ))`, the closed-form conversion.
pub fn zcdp_to_dp_closed_form(rho: f64, delta: f64) -> f64 {
    rho + 2.0 * (rho * (1.0 / delta).ln()).sqrt()
}

/// Approximate-DP `ε` at `δ` for a `ρ`-zCDP mechanism, minimizing the
/// conversion objective over the Rényi order `α > 1`.
///
/// The search runs on `u = ln(α - 1)`: a coarse scan followed by golden-section
/// refinement around the best grid point. The result is clamped to the closed
/// form, which it can only improve on.
pub fn zcdp_to_dp(rho: f64, delta: f64) -> Result<f64> {
    check_positive("rho", rho)?;
    if !(delta > 0.0 && delta < 1.0) {
        return Err(invalid("delta", format!("must lie in (0, 1), got {delta}")));
    }
    let l = (1.0 / delta).ln();
    let f = |u: f64| conversion_objective(rho, l, 1.0 + u.exp());
    let (lo, hi, steps) = (-30.0, 90.0, 600);
    let h = (hi - lo) / steps as f64;
    let mut best = (lo, f64::INFINITY);
    for i in 0..=steps {
        let u = lo + h * i as f64;
        let v = f(u);
        if v < best.1 {
            best = (u, v);
        }
    }
    // The closed-form optimum α = 1 + sqrt(ln(1/δ)/ρ) is a good extra candidate.
    let u_star = (l / rho).sqrt().ln();
    if u_star.is_finite() && f(u_star) < best.1 {
        best = (u_star, f(u_star));
    }
    let (_, v) = golden_min(best.0 - h, best.0 + h, 200, f);
    let value = v.min(best.1);
    Ok(value.clamp(0.0, zcdp_to_dp_closed_form(rho, delta)))
}

/// `T` rounds of a `ρ`-zCDP mechanism are `Tρ`-zCDP.
pub fn compose(rho_per_round: f64, rounds: u64) -> f64 {
    rounds as f64 * rho_per_round
}

/// The smallest `σ` in `[γ/2, 10⁶ c]` whose `ε` does not exceed `target_eps`,
/// to relative tolerance `10⁻⁹`.
pub fn calibrate_sigma(target_eps: f64, c: f64, gamma: f64, beta: f64, n: u64, d: u64) -> Result<f64> {
    check_positive("target_eps", target_eps)?;
    let params = RoundingParams::new(gamma, beta, d as usize)?;
    let delta2 = delta2_bound(c, &params)?.delta2;
    calibrate_sigma_for(target_eps, delta2, c, gamma, n, d)
}

fn calibrate_sigma_for(target_eps: f64, delta2: f64, c: f64, gamma: f64, n: u64, d: u64) -> Result<f64> {
    let eps = |s: f64| epsilon_zcdp(delta2, s, gamma, n, d, None).map(|e| e.eps);
    let floor = gamma / 2.0;
    let cap = SIGMA_CAP_FACTOR * c;
    let at_floor = eps(floor)?;
    if at_floor <= target_eps {
        return Ok(floor);
    }
    let at_cap = if cap > floor { eps(cap)? } else { at_floor };
    if at_cap > target_eps {
        return Err(Error::EpsilonUnachievable {
            target: target_eps,
            eps_at_floor: at_floor,
            eps_at_cap: at_cap,
            sigma_floor: floor,
            sigma_cap: cap,
        });
    }
    Ok(log_bisect(floor, cap, SIGMA_REL_TOL, |s| {
        eps(s).map(|e| e <= target_eps).unwrap_or(false)
    }))
}

/// Sum-norm bound used when sizing the modular range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormMode {
    /// `‖Σxᵢ‖₂ ≤ cn`
    General,
    /// `‖Σxᵢ‖₂ ≤ c√n`
    Optimistic,
}

impl NormMode {
    pub fn sum_norm_bound(self, c: f64, n: u64) -> f64 {
        match self {
            NormMode::General => c * n as f64,
            NormMode::Optimistic => c * (n as f64).sqrt(),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            NormMode::General => "general",
            NormMode::Optimistic => "optimistic",
        }
    }
}

impl std::str::FromStr for NormMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "general" => Ok(NormMode::General),
            "optimistic" => Ok(NormMode::Optimistic),
            other => Err(invalid(
                "norm_mode",
                format!("expected `general` or `optimistic`, got `{other}`"),
            )),
        }
    }
}

/// The communication budget: `B` bits per coordinate, with the modular range
/// required to cover `k` standard deviations of the aggregate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CommBudget {
    pub bit_width: u32,
    pub k: f64,
    pub norm_mode: NormMode,
}

impl CommBudget {
    pub fn new(bit_width: u32, k: f64, norm_mode: NormMode) -> Result<Self> {
        if !(1..=crate::modular::MAX_BITS).contains(&bit_width) {
            return Err(invalid("B", format!("must lie in 1..=62, got {bit_width}")));
        }
        check_positive("k", k)?;
        Ok(Self {
            bit_width,
            k,
            norm_mode,
        })
    }

    /// `m/2 = 2^{B-1}`.
    pub fn half_range(&self) -> f64 {
        2f64.powi(self.bit_width as i32 - 1)
    }
}

/// Everything the accountant reports about one configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrivacyReport {
    pub delta2: SensitivityBound,
    pub tau: f64,
    pub eps_zcdp: f64,
    pub rho: f64,
    pub eps_dp: f64,
    pub delta: f64,
    pub branch_used: EpsilonBranch,
    pub composition_note: &'static str,
}

/// Inputs to [`privacy_report`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReportRequest {
    pub c: f64,
    pub gamma: f64,
    pub sigma: f64,
    pub beta: f64,
    pub n: u64,
    pub d: u64,
    pub delta: f64,
    pub delta1: Option<f64>,
    /// Replaces the sensitivity derived from `(c, γ, β, d)`.
    pub delta2_override: Option<f64>,
}

pub fn privacy_report(req: &ReportRequest) -> Result<PrivacyReport> {
    let delta2 = match req.delta2_override {
        Some(v) => SensitivityBound::fixed(v, req.gamma)?,
        None => delta2_bound(req.c, &RoundingParams::new(req.gamma, req.beta, req.d as usize)?)?,
    };
    let e = epsilon_zcdp(delta2.delta2, req.sigma, req.gamma, req.n, req.d, req.delta1)?;
    let rho = 0.5 * e.eps * e.eps;
    let eps_dp = zcdp_to_dp(rho, req.delta)?;
    Ok(PrivacyReport {
        delta2,
        tau: e.tau,
        eps_zcdp: e.eps,
        rho,
        eps_dp,
        delta: req.delta,
        branch_used: e.branch,
        composition_note: COMPOSITION_NOTE,
    })
}

/// Outcome of [`choose_gamma`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GammaChoice {
    pub gamma: f64,
    pub sigma: f64,
    /// `k s(γ) / 2^{B-1}`; at most 1.
    pub range_ratio: f64,
    /// False when the grid scan contradicted the bisection and was used instead.
    pub monotone: bool,
    pub report: PrivacyReport,
}

/// Standard deviation proxy, in grid units, of one coordinate of the
/// flattened noisy aggregate: `s(γ)² = S²/(γ²d) + n(1/4 + σ²/γ²)`.
pub fn aggregate_scale(sum_norm: f64, gamma: f64, sigma: f64, n: u64, d: u64) -> f64 {
    let g2 = gamma * gamma;
    (sum_norm * sum_norm / (g2 * d as f64) + n as f64 * (0.25 + sigma * sigma / g2)).sqrt()
}

/// The smallest granularity `γ` for which the modular range covers `k`
/// aggregate standard deviations once `σ` is calibrated to `target_eps`.
///
/// `d` is the padded dimension the protocol actually transmits.
#[allow(clippy::too_many_arguments)]
pub fn choose_gamma(
    budget: &CommBudget,
    target_eps: f64,
    c: f64,
    beta: f64,
    n: u64,
    d: u64,
    delta: f64,
) -> Result<GammaChoice> {
    check_positive("target_eps", target_eps)?;
    check_positive("c", c)?;
    let s_norm = budget.norm_mode.sum_norm_bound(c, n);
    let half = budget.half_range();
    let ratio = |gamma: f64| -> f64 {
        match calibrate_sigma(target_eps, c, gamma, beta, n, d) {
            Ok(sigma) => budget.k * aggregate_scale(s_norm, gamma, sigma, n, d) / half,
            Err(_) => f64::INFINITY,
        }
    };
    let (lo, hi) = (1e-10 * c, 1e3 * c);
    let grid: Vec<(f64, f64)> = (0..GAMMA_GRID_POINTS)
        .map(|i| {
            let t = i as f64 / (GAMMA_GRID_POINTS - 1) as f64;
            let g = (lo.ln() + t * (hi.ln() - lo.ln())).exp();
            (g, ratio(g))
        })
        .collect();
    let first_feasible = grid.iter().position(|&(_, r)| r <= 1.0);
    let Some(first) = first_feasible else {
        let min_ratio = grid.iter().map(|&(_, r)| r).fold(f64::INFINITY, f64::min);
        return Err(Error::InfeasibleGranularity { min_ratio });
    };
    let monotone = grid[first..].iter().all(|&(_, r)| r <= 1.0);
    // The boundary lies between the first feasible grid point and its
    // predecessor; a non-monotone scan still resolves to that crossing.
    let gamma = if first == 0 {
        grid[0].0
    } else {
        log_bisect(grid[first - 1].0, grid[first].0, GAMMA_REL_TOL, |g| ratio(g) <= 1.0)
    };
    let sigma = calibrate_sigma(target_eps, c, gamma, beta, n, d)?;
    let report = privacy_report(&ReportRequest {
        c,
        gamma,
        sigma,
        beta,
        n,
        d,
        delta,
        delta1: None,
        delta2_override: None,
    })?;
    Ok(GammaChoice {
        gamma,
        sigma,
        range_ratio: ratio(gamma),
        monotone,
        report,
    })
}

/// Parameters of one mechanism instance, enough to recompute `ε`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MechanismParams {
    pub delta2: f64,
    pub sigma: f64,
    pub gamma: f64,
    pub n: u64,
    pub d: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DropoutEpsilon {
    pub drop_fraction: f64,
    pub surviving: u64,
    pub eps: f64,
    pub baseline_eps: f64,
    /// `eps / baseline_eps`
    pub ratio: f64,
}

/// `ε` when only `n' = ⌈n(1 - f)⌉` clients' noise shares reach the aggregate;
/// the sensitivity is unchanged.
pub fn dropout_epsilon(params: &MechanismParams, drop_fraction: f64) -> Result<DropoutEpsilon> {
    if !(0.0..1.0).contains(&drop_fraction) {
        return Err(invalid("drop_fraction", format!("must lie in [0, 1), got {drop_fraction}")));
    }
    // The small slack keeps e.g. 100 * (1 - 0.9) from rounding up to 11.
    let surviving = ((params.n as f64) * (1.0 - drop_fraction) - 1e-9).ceil().max(1.0) as u64;
    let eps_of = |n: u64| {
        epsilon_zcdp(params.delta2, params.sigma, params.gamma, n, params.d, None).map(|e| e.eps)
    };
    let baseline_eps = eps_of(params.n)?;
    let eps = eps_of(surviving)?;
    Ok(DropoutEpsilon {
        drop_fraction,
        surviving,
        eps,
        baseline_eps,
        ratio: eps / baseline_eps,
    })
}
