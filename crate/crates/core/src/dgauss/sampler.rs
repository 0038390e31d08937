//! Exact discrete Gaussian sampling.
//!
//! Rejection sampling from a discrete Laplace proposal with scale
//! `t = floor(s) + 1`: a proposal `y` is accepted with probability
//! `exp(-(|y| - s^2/t)^2 / (2 s^2))`. Every Bernoulli trial, including those
//! with probability `exp(-p/q)`, is decided by comparing a uniform integer
//! against a rational threshold, so no floating-point rounding enters the law.
//! The variance `s^2` is read as the exact dyadic rational its `f64` encodes.
//!
//! Arithmetic runs in `u128` and switches to `BigUint` mid-loop on overflow,
//! which keeps the fast path exact as well.

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, RngCore};

use super::NoiseScale;
use crate::error::{Error, Result};

/// Number of rejected proposals after which sampling reports an internal failure.
pub const SAMPLER_RETRY_CAP: u64 = 1_000_000;

/// A discrete Gaussian `N_Z(0, s^2)` with its exact rational parameters
/// precomputed.
#[derive(Debug, Clone)]
pub struct DiscreteGaussian {
    scale: NoiseScale,
    // s^2 = num / den, den a power of two.
    num: BigUint,
    den: BigUint,
    small: Option<(u128, u128)>,
    // proposal scale t = floor(s) + 1
    t: u64,
}

impl DiscreteGaussian {
    pub fn new(scale: NoiseScale) -> Self {
        let (num, den) = dyadic_parts(scale.variance());
        let t = (&num / &den).sqrt().to_u64().expect("scale bounded") + 1;
        let small = match (num.to_u128(), den.to_u128()) {
            (Some(a), Some(b)) => Some((a, b)),
            _ => None,
        };
        Self {
            scale,
            num,
            den,
            small,
            t,
        }
    }

    pub fn scale(&self) -> NoiseScale {
        self.scale
    }

    pub fn sample<R: RngCore + ?Sized>(&self, rng: &mut R) -> Result<i64> {
        for _ in 0..SAMPLER_RETRY_CAP {
            let y = discrete_laplace(self.t, rng);
            if self.accept(y.unsigned_abs(), rng) {
                return Ok(y);
            }
        }
        Err(Error::SamplerRetryCap(SAMPLER_RETRY_CAP))
    }

    pub fn sample_vec<R: RngCore + ?Sized>(&self, len: usize, rng: &mut R) -> Result<Vec<i64>> {
        (0..len).map(|_| self.sample(rng)).collect()
    }

    // Bernoulli(exp(-(|y| den t - num)^2 / (2 num den t^2))).
    fn accept<R: RngCore + ?Sized>(&self, y: u64, rng: &mut R) -> bool {
        if let Some((num, den)) = self.small {
            let t = self.t as u128;
            let fast = (|| {
                let shifted = (y as u128).checked_mul(den)?.checked_mul(t)?;
                let diff = shifted.abs_diff(num);
                let p = diff.checked_mul(diff)?;
                let q = num.checked_mul(2)?.checked_mul(den)?.checked_mul(t)?.checked_mul(t)?;
                Some((p, q))
            })();
            if let Some((p, q)) = fast {
                return bernoulli_exp_u128(p, q, rng);
            }
        }
        let t = BigUint::from(self.t);
        let shifted = BigUint::from(y) * &self.den * &t;
        let diff = if shifted >= self.num {
            shifted - &self.num
        } else {
            &self.num - shifted
        };
        let p = &diff * &diff;
        let q = BigUint::from(2u32) * &self.num * &self.den * &t * &t;
        bernoulli_exp_big(p, q, rng)
    }
}

/// One exact draw from `N_Z(0, s^2)`.
pub fn sample_dgauss<R: RngCore + ?Sized>(scale: NoiseScale, rng: &mut R) -> Result<i64> {
    DiscreteGaussian::new(scale).sample(rng)
}

/// Splits a positive finite `f64` into `num / den` with `den` a power of two.
fn dyadic_parts(v: f64) -> (BigUint, BigUint) {
    debug_assert!(v.is_finite() && v > 0.0);
    let bits = v.to_bits();
    let exp_bits = ((bits >> 52) & 0x7ff) as i64;
    let frac = bits & ((1u64 << 52) - 1);
    let (mantissa, exp) = if exp_bits == 0 {
        (frac, -1074)
    } else {
        (frac | (1u64 << 52), exp_bits - 1075)
    };
    let tz = mantissa.trailing_zeros() as i64;
    let (mantissa, exp) = (mantissa >> tz, exp + tz);
    if exp >= 0 {
        (BigUint::from(mantissa) << exp as usize, BigUint::one())
    } else {
        (BigUint::from(mantissa), BigUint::one() << (-exp) as usize)
    }
}

/// P[Y = y] proportional to exp(-|y|/t).
fn discrete_laplace<R: RngCore + ?Sized>(t: u64, rng: &mut R) -> i64 {
    loop {
        let u = rng.random_range(0..t);
        if !bernoulli_exp_u128(u as u128, t as u128, rng) {
            continue;
        }
        let mut v: u64 = 0;
        while bernoulli_exp_u128(1, 1, rng) {
            v += 1;
        }
        let x = u + t * v;
        let negative = rng.random::<bool>();
        if negative && x == 0 {
            continue;
        }
        let x = x as i64;
        return if negative { -x } else { x };
    }
}

/// Bernoulli(exp(-p/q)) for `p >= 0`, `q > 0`.
fn bernoulli_exp_u128<R: RngCore + ?Sized>(p: u128, q: u128, rng: &mut R) -> bool {
    debug_assert!(q > 0);
    let (whole, rem) = (p / q, p % q);
    let mut i = 0u128;
    while i < whole {
        if !bernoulli_exp_unit_u128(1, 1, rng) {
            return false;
        }
        i += 1;
    }
    bernoulli_exp_unit_u128(rem, q, rng)
}

// Bernoulli(exp(-p/q)) for 0 <= p <= q: count K until Bernoulli(p/(qK)) fails,
// return whether K is odd.
fn bernoulli_exp_unit_u128<R: RngCore + ?Sized>(p: u128, q: u128, rng: &mut R) -> bool {
    let mut k: u128 = 1;
    loop {
        let qk = match q.checked_mul(k) {
            Some(v) => v,
            None => {
                return continue_unit_big(BigUint::from(p), BigUint::from(q), BigUint::from(k), rng)
            }
        };
        if rng.random_range(0..qk) >= p {
            break;
        }
        k += 1;
    }
    k % 2 == 1
}

fn bernoulli_exp_big<R: RngCore + ?Sized>(p: BigUint, q: BigUint, rng: &mut R) -> bool {
    let (whole, rem) = p.div_rem(&q);
    let mut i = BigUint::zero();
    while i < whole {
        if !bernoulli_exp_unit_u128(1, 1, rng) {
            return false;
        }
        i += 1u32;
    }
    continue_unit_big(rem, q, BigUint::one(), rng)
}

fn continue_unit_big<R: RngCore + ?Sized>(p: BigUint, q: BigUint, mut k: BigUint, rng: &mut R) -> bool {
    loop {
        let qk = &q * &k;
        if uniform_below(&qk, rng) >= p {
            break;
        }
        k += 1u32;
    }
    k.is_odd()
}

/// Uniform integer in `[0, bound)` by rejection on the bit length.
fn uniform_below<R: RngCore + ?Sized>(bound: &BigUint, rng: &mut R) -> BigUint {
    debug_assert!(!bound.is_zero());
    if let Some(b) = bound.to_u128() {
        return BigUint::from(rng.random_range(0..b));
    }
    let bits = bound.bits();
    let words = bits.div_ceil(32) as usize;
    let top_bits = bits - 32 * (words as u64 - 1);
    let mask = if top_bits == 32 {
        u32::MAX
    } else {
        (1u32 << top_bits) - 1
    };
    loop {
        let mut digits: Vec<u32> = (0..words).map(|_| rng.next_u32()).collect();
        digits[words - 1] &= mask;
        let candidate = BigUint::new(digits);
        if &candidate < bound {
            return candidate;
        }
    }
}
