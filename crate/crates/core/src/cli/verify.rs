use std::f64::consts::PI;

use rand::Rng;

use super::format::fmt_num;
use super::{env_seed, Suite, VerifyArgs};
use crate::dgauss::{convolution_max_log_ratio, exact_pmf, DiscreteGaussian, NoiseScale};
use crate::flatten::{flatten, unflatten, wht, Direction, SignVector};
use crate::rounding::{conditional_round, delta2_bound, grid_norm_sq, randomized_round, RoundingParams};
use crate::seeds;

/// One verified property: `measured` must satisfy the relation to `limit`.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub limit: f64,
    pub pass: bool,
}

impl Check {
    fn at_most(name: impl Into<String>, measured: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            measured,
            limit,
            pass: measured <= limit,
        }
    }

    fn below(name: impl Into<String>, measured: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            measured,
            limit,
            pass: measured < limit,
        }
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn convolution_suite() -> crate::Result<Vec<Check>> {
    let s3 = NoiseScale::from_variance(3.0)?;
    let two = convolution_max_log_ratio(2, s3, 60)?;
    let mut checks = vec![Check::at_most(
        "n=2 s^2=3 max |log ratio|",
        two.max_abs_log_ratio,
        1e-12,
    )];
    for n in [3u32, 5] {
        let radius = crate::dgauss::required_radius(n, s3).max(60);
        let c = convolution_max_log_ratio(n, s3, radius)?;
        let bound = 5.0 * (1..n).map(|k| (-2.0 * PI * PI * 3.0 * k as f64 / (k as f64 + 1.0)).exp()).sum::<f64>();
        checks.push(Check::at_most(
            format!("n={n} s^2=3 max |log ratio| vs 5*sum bound"),
            c.max_abs_log_ratio,
            bound,
        ));
    }
    Ok(checks)
}

pub fn sampler_suite(seed: u64) -> crate::Result<Vec<Check>> {
    let mut rng = seeds::stream("ddgauss/verify/sampler", seed, &[]);
    let scale = NoiseScale::new(1.0)?;
    let g = DiscreteGaussian::new(scale);
    let samples = g.sample_vec(1_000_000, &mut rng)?;
    let pmf = exact_pmf(scale, 40, 1e-15)?;
    let tv = pmf.tv_distance_to_samples(&samples);
    let mean = samples.iter().sum::<i64>() as f64 / samples.len() as f64;

    let half = NoiseScale::new(0.5)?;
    let small = DiscreteGaussian::new(half).sample_vec(200_000, &mut rng)?;
    let var = small.iter().map(|&x| (x * x) as f64).sum::<f64>() / small.len() as f64;

    let tiny = DiscreteGaussian::new(NoiseScale::new(0.01)?).sample_vec(100_000, &mut rng)?;
    let nonzero = tiny.iter().filter(|&&x| x != 0).count() as f64;
    Ok(vec![
        Check::at_most("s=1 TV distance, 1e6 samples", tv, 0.005),
        Check::at_most("s=1 |mean|", mean.abs(), 4.0 / 1000.0),
        Check::below("s=1/2 empirical variance below s^2", var, 0.25),
        Check::at_most("s=0.01 nonzero draws", nonzero, 0.0),
    ])
}

pub fn transform_suite(seed: u64) -> crate::Result<Vec<Check>> {
    let mut rng = seeds::stream("ddgauss/verify/transform", seed, &[]);
    let d = 1 << 16;
    let x: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
    let xi = SignVector::from_seed(seed, d)?;
    let y = flatten(&x, &xi)?;
    let back = unflatten(&y, &xi)?;
    let diff: Vec<f64> = x.iter().zip(&back).map(|(a, b)| a - b).collect();

    let mut z = x.clone();
    wht(&mut z, Direction::Forward)?;
    wht(&mut z, Direction::Inverse)?;
    let inv: Vec<f64> = x.iter().zip(&z).map(|(a, b)| a - b).collect();

    let nx = norm(&x);
    Ok(vec![
        Check::at_most("unitarity |‖Hx‖ - ‖x‖| / ‖x‖", (norm(&y) - nx).abs() / nx, 1e-9),
        Check::at_most("round trip relative error", norm(&diff) / nx, 1e-12),
        Check::at_most("involution relative error", norm(&inv) / nx, 1e-12),
    ])
}

pub fn rounding_suite(seed: u64) -> crate::Result<Vec<Check>> {
    let mut rng = seeds::stream("ddgauss/verify/rounding", seed, &[]);
    let trials = 100_000;
    let ups = (0..trials)
        .filter(|_| randomized_round(&[0.3], 1.0, &mut rng).map(|v| v[0] == 1.0).unwrap_or(false))
        .count() as f64;

    let gamma = 0.5;
    let x: Vec<f64> = (0..128).map(|_| rng.random_range(-1.0..1.0)).collect();
    let reps = 10_000;
    let mut mean = vec![0.0; x.len()];
    for _ in 0..reps {
        for (m, v) in mean.iter_mut().zip(randomized_round(&x, gamma, &mut rng)?) {
            *m += v / reps as f64;
        }
    }
    let worst_bias = mean.iter().zip(&x).map(|(m, v)| (m - v).abs()).fold(0.0, f64::max);

    let beta = (-0.5f64).exp();
    let (d, c, g) = (64usize, 1.0, 0.05);
    let params = RoundingParams::new(g, beta, d)?;
    let cap = delta2_bound(c, &params)?.delta2_grid;
    let calls = 10_000;
    let mut retries = 0u64;
    let mut worst_norm = 0.0f64;
    for _ in 0..calls {
        let v: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let s = c / g / norm(&v);
        let v: Vec<f64> = v.iter().map(|a| a * s).collect();
        let r = conditional_round(&v, c, &params, &mut rng)?;
        retries += r.retries as u64;
        worst_norm = worst_norm.max((grid_norm_sq(&r.grid) as f64).sqrt() / cap);
    }
    Ok(vec![
        Check::at_most("P[round 0.3 up] - 0.3", (ups / trials as f64 - 0.3).abs(), 0.01),
        Check::at_most("max coordinate bias, 1e4 roundings", worst_bias, 4.0 * (gamma / 2.0) / 100.0),
        Check::at_most("accepted norm / cap", worst_norm, 1.0),
        Check::at_most("mean retries", retries as f64 / calls as f64, 1.0 / (1.0 - beta) - 1.0),
    ])
}

pub fn run_suite(suite: Suite, seed: u64) -> crate::Result<Vec<Check>> {
    match suite {
        Suite::Convolution => convolution_suite(),
        Suite::Sampler => sampler_suite(seed),
        Suite::Transform => transform_suite(seed),
        Suite::Rounding => rounding_suite(seed),
    }
}

pub fn cmd_verify(args: &VerifyArgs) -> anyhow::Result<bool> {
    let seed = match args.seed {
        Some(s) => s,
        None => env_seed()?.unwrap_or(0),
    };
    let checks = run_suite(args.suite, seed)?;
    for c in &checks {
        println!(
            "{} {}: measured {} (limit {})",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            fmt_num(c.measured),
            fmt_num(c.limit)
        );
    }
    let failed: Vec<&str> = checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
    if failed.is_empty() {
        println!("PASS");
        Ok(true)
    } else {
        println!("FAIL: {}", failed.join("; "));
        Ok(false)
    }
}
