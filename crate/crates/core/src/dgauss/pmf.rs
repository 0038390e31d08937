use std::collections::HashMap;

use super::NoiseScale;
use crate::error::{invalid, Error, Result};
use crate::numeric::CompensatedSum;

/// A finite window `[-R, R]` of the discrete Gaussian pmf.
///
/// Masses are normalized by the full (untruncated) normalizer, so they sum to
/// `1 - tail_bound`.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedPmf {
    support_radius: i64,
    masses: Vec<f64>,
    tail_bound: f64,
}

impl TruncatedPmf {
    pub fn support_radius(&self) -> i64 {
        self.support_radius
    }

    /// Mass excluded by the truncation, `P[|X| > R]`.
    pub fn tail_bound(&self) -> f64 {
        self.tail_bound
    }

    /// Masses indexed by `x + R`.
    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn mass(&self, x: i64) -> f64 {
        if x.abs() > self.support_radius {
            return 0.0;
        }
        self.masses[(x + self.support_radius) as usize]
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        let r = self.support_radius;
        self.masses.iter().enumerate().map(move |(i, &p)| (i as i64 - r, p))
    }

    pub fn total(&self) -> f64 {
        let mut acc = CompensatedSum::new();
        self.masses.iter().for_each(|&p| acc.add(p));
        acc.value()
    }

    /// `E[X^2]` over the window.
    pub fn second_moment(&self) -> f64 {
        let mut acc = CompensatedSum::new();
        self.iter().for_each(|(x, p)| acc.add((x * x) as f64 * p));
        acc.value()
    }

    /// `E[exp(tX)]` over the window.
    pub fn mgf(&self, t: f64) -> f64 {
        let mut acc = CompensatedSum::new();
        self.iter().for_each(|(x, p)| acc.add(p * (t * x as f64).exp()));
        acc.value()
    }

    /// Total-variation distance between the empirical law of `samples` and
    /// this pmf; samples outside the window count fully against it.
    pub fn tv_distance_to_samples(&self, samples: &[i64]) -> f64 {
        let mut counts: HashMap<i64, u64> = HashMap::new();
        for &s in samples {
            *counts.entry(s).or_default() += 1;
        }
        let n = samples.len() as f64;
        let mut acc = CompensatedSum::new();
        for (x, p) in self.iter() {
            let emp = counts.remove(&x).unwrap_or(0) as f64 / n;
            acc.add((emp - p).abs());
        }
        for (_, c) in counts {
            acc.add(c as f64 / n);
        }
        acc.add(self.tail_bound);
        0.5 * acc.value()
    }
}

fn weight(x: i64, variance: f64) -> f64 {
    let x = x as f64;
    (-(x * x) / (2.0 * variance)).exp()
}

/// Sums `sum_{x >= from} exp(-x^2/2s^2)` until terms drop below `rel * partial`.
fn tail_weight(from: i64, variance: f64, rel: f64, reference: f64) -> f64 {
    let mut acc = CompensatedSum::new();
    let mut x = from;
    loop {
        let w = weight(x, variance);
        acc.add(w);
        if w <= rel * (reference + acc.value()) || w == 0.0 {
            return acc.value();
        }
        x += 1;
    }
}

/// Natural log of the normalizer `sum_{x in Z} exp(-x^2 / 2 s^2)`.
pub fn log_normalizer(scale: NoiseScale) -> f64 {
    let v = scale.variance();
    let half = tail_weight(1, v, 1e-20, 0.5);
    (1.0 + 2.0 * half).ln()
}

/// The discrete Gaussian pmf on `[-support_radius, support_radius]`.
///
/// The normalizer is summed with compensation until the terms fall below
/// `tolerance` relative to the running sum (and never coarser than `1e-20`);
/// the mass beyond the window is reported as `tail_bound` and must not exceed
/// `tolerance`.
pub fn exact_pmf(scale: NoiseScale, support_radius: i64, tolerance: f64) -> Result<TruncatedPmf> {
    let min_radius = (12.0 * scale.sigma()).ceil() as i64;
    if support_radius < min_radius {
        return Err(invalid(
            "support_radius",
            format!("must be at least ceil(12 s) = {min_radius}, got {support_radius}"),
        ));
    }
    if !(tolerance > 0.0) {
        return Err(invalid("tolerance", format!("must be positive, got {tolerance}")));
    }
    let v = scale.variance();
    let rel = tolerance.min(1e-20);

    let mut inner = CompensatedSum::new();
    for x in 1..=support_radius {
        inner.add(weight(x, v));
    }
    let inner = inner.value();
    let outer = tail_weight(support_radius + 1, v, rel, inner);
    let normalizer = 1.0 + 2.0 * (inner + outer);
    let tail_bound = 2.0 * outer / normalizer;
    if tail_bound > tolerance {
        return Err(Error::ToleranceUnachievable {
            requested: tolerance,
            radius: support_radius,
            achievable_tail: tail_bound,
        });
    }

    let masses = (-support_radius..=support_radius)
        .map(|x| weight(x, v) / normalizer)
        .collect();
    Ok(TruncatedPmf {
        support_radius,
        masses,
        tail_bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pmf(v: f64, r: i64) -> TruncatedPmf {
        exact_pmf(NoiseScale::from_variance(v).unwrap(), r, 1e-15).unwrap()
    }

    #[test]
    fn adjacent_mass_ratio_is_sqrt_e() {
        let p = pmf(1.0, 12);
        let ratio = p.mass(0) / p.mass(1);
        assert!((ratio / 0.5f64.exp() - 1.0).abs() < 1e-14);
        assert!((ratio - 1.64872).abs() < 1e-5);
    }

    #[test]
    fn tail_at_radius_sixty_is_negligible() {
        let p = pmf(3.0, 60);
        assert!(p.tail_bound() < 1e-15);
        // the normalizer does not move when the window doubles
        let wide = pmf(3.0, 120);
        for x in -60..=60 {
            assert!((p.mass(x) / wide.mass(x) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn symmetric_and_normalized() {
        for &v in &[0.25, 1.0, 3.0, 9.0, 100.0] {
            let r = (12.0 * f64::sqrt(v)).ceil() as i64;
            let p = pmf(v, r);
            for x in 0..=r {
                assert_eq!(p.mass(x), p.mass(-x));
            }
            let total = p.total();
            assert!(total <= 1.0 + 1e-15 && total >= 1.0 - p.tail_bound() - 1e-15);
        }
    }

    #[test]
    fn radius_below_twelve_sigma_is_rejected() {
        let s = NoiseScale::from_variance(9.0).unwrap();
        assert!(exact_pmf(s, 35, 1e-10).is_err());
        assert!(exact_pmf(s, 36, 1e-10).is_ok());
    }

    #[test]
    fn unreachable_tolerance_names_tail_mass() {
        let s = NoiseScale::new(1.0).unwrap();
        match exact_pmf(s, 12, 1e-40) {
            Err(Error::ToleranceUnachievable { achievable_tail, .. }) => {
                assert!(achievable_tail > 1e-40 && achievable_tail < 1e-30)
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn variance_is_below_parameter() {
        // The gap shrinks like exp(-2 pi^2 s^2); from s^2 = 3 on it is below f64 resolution.
        for &v in &[0.25, 0.5, 1.0] {
            let r = (12.0 * f64::sqrt(v)).ceil() as i64 + 5;
            assert!(pmf(v, r).second_moment() < v);
        }
        for &v in &[3.0, 9.0] {
            let r = (12.0 * f64::sqrt(v)).ceil() as i64 + 5;
            assert!(pmf(v, r).second_moment() <= v * (1.0 + 1e-14));
        }
    }

    #[test]
    fn mgf_is_subgaussian() {
        let p = pmf(1.0, 40);
        for &t in &[0.1, 0.5, 1.0] {
            assert!(p.mgf(t) <= (t * t / 2.0).exp() * (1.0 + 1e-9));
        }
    }

    #[test]
    fn log_normalizer_matches_large_scale_limit() {
        // For large s the normalizer is s sqrt(2 pi) to within e^{-2 pi^2 s^2}.
        let s = NoiseScale::new(5.0).unwrap();
        let want = (5.0 * (2.0 * std::f64::consts::PI).sqrt()).ln();
        assert!((log_normalizer(s) - want).abs() < 1e-14);
    }
}
