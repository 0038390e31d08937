//! Brute-force comparison of an n-fold convolution of discrete Gaussians with
//! a single discrete Gaussian of the summed variance.
//!
//! The deviations being measured are as small as `1e-38` (for `s^2 = 9`),
//! far below what `f64` can resolve, so the whole computation runs on 256-bit
//! binary floats. Two cutoffs bound the set of compared points:
//!
//! * the mode cutoff drops `z` where the target mass is below `1e-300` of its
//!   mode, since ratios of such tails carry no information;
//! * the truncation margin drops `z` with `|z|/n > R - 17 s`, where the missing
//!   mass from components beyond the support radius `R` could exceed
//!   `exp(-17^2 / 2)` relative.

use dashu_float::{round::mode::HalfEven, FBig};

use super::NoiseScale;
use crate::error::{invalid, Error, Result};

type Big = FBig<HalfEven>;

const PRECISION_BITS: usize = 256;
/// Relative size below the mode at which tail points are excluded.
pub const MODE_CUTOFF: f64 = 1e-300;
/// Distance, in units of `s`, kept between compared points and the truncation edge.
pub const TRUNCATION_MARGIN: f64 = 17.0;

/// Result of [`convolution_max_log_ratio`].
#[derive(Debug, Clone, PartialEq)]
pub struct ConvolutionCloseness {
    pub count: u32,
    pub variance: f64,
    pub support_radius: i64,
    /// `max |log(P[Z_n = z] / P[W_n = z])|` over the compared window.
    pub max_abs_log_ratio: f64,
    pub argmax: i64,
    /// Points `|z| <= compared_radius` were compared.
    pub compared_radius: i64,
    pub mode_cutoff: f64,
    pub truncation_margin: f64,
    pub precision_bits: usize,
}

fn big(x: f64) -> Big {
    Big::try_from(x)
        .expect("finite")
        .with_precision(PRECISION_BITS)
        .value()
}

fn big_int(x: i64) -> Big {
    Big::from(x).with_precision(PRECISION_BITS).value()
}

fn weight(x: i64, two_var: &Big) -> Big {
    let e = -(big_int(x * x) / two_var);
    e.exp()
}

fn normalizer(two_var: &Big) -> Big {
    let eps = big(2f64.powi(-(PRECISION_BITS as i32) - 8));
    let mut sum = big(1.0);
    let mut x = 1i64;
    loop {
        let w = weight(x, two_var);
        let twice = &w + &w;
        sum += twice;
        if w < &eps * &sum {
            return sum;
        }
        x += 1;
    }
}

/// Smallest support radius for which the comparison window covers at least
/// six standard deviations of the summed distribution.
pub fn required_radius(count: u32, scale: NoiseScale) -> i64 {
    let s = scale.sigma();
    let n = count.max(1) as f64;
    let bulk = 6.0 * s * n.sqrt();
    let by_window = TRUNCATION_MARGIN * s + bulk / n;
    (12.0 * s).ceil().max(by_window.ceil()) as i64
}

/// Max absolute log-ratio between the `count`-fold self-convolution of
/// `N_Z(0, s^2)` and `N_Z(0, count * s^2)`.
pub fn convolution_max_log_ratio(
    count: u32,
    scale: NoiseScale,
    support_radius: i64,
) -> Result<ConvolutionCloseness> {
    if count == 0 {
        return Err(invalid("count", "must be at least 1"));
    }
    let required = required_radius(count, scale);
    if support_radius < required {
        return Err(Error::SupportTooSmall {
            radius: support_radius,
            required,
        });
    }
    let n = count as i64;
    let r = support_radius;
    let v = scale.variance();
    let s = scale.sigma();

    let two_var = big(v) * big(2.0);
    let norm1 = normalizer(&two_var);
    let single: Vec<Big> = (-r..=r).map(|x| weight(x, &two_var) / &norm1).collect();

    // acc[i] = P[Z_k = i - k r]
    let mut acc = single.clone();
    for _ in 1..count {
        let mut next = vec![big(0.0); acc.len() + single.len() - 1];
        for (i, a) in acc.iter().enumerate() {
            for (j, b) in single.iter().enumerate() {
                next[i + j] += a * b;
            }
        }
        acc = next;
    }
    let offset = n * r;

    let trunc_window = (n as f64 * (r as f64 - TRUNCATION_MARGIN * s)).floor() as i64;
    let mode_window = (2.0 * n as f64 * v * (1.0 / MODE_CUTOFF).ln()).sqrt().floor() as i64;
    let compared_radius = trunc_window.min(mode_window).min(offset);

    let two_var_n = &two_var * big_int(n);
    let norm_n = normalizer(&two_var_n);
    let one = big(1.0);
    let mut best = (0.0f64, 0i64);
    for z in -compared_radius..=compared_radius {
        let target = weight(z, &two_var_n) / &norm_n;
        let ratio = &acc[(z + offset) as usize] / target;
        let dev = (ratio - &one).to_f64().value();
        let log_ratio = dev.ln_1p().abs();
        if log_ratio > best.0 {
            best = (log_ratio, z);
        }
    }

    Ok(ConvolutionCloseness {
        count,
        variance: v,
        support_radius,
        max_abs_log_ratio: best.0,
        argmax: best.1,
        compared_radius,
        mode_cutoff: MODE_CUTOFF,
        truncation_margin: TRUNCATION_MARGIN,
        precision_bits: PRECISION_BITS,
    })
}
