//! Monte Carlo checks of the sampler, the rounding and flattening steps and
//! the DME data generators. Every tolerance is a fixed multiple of the
//! standard error of the estimated quantity.

use ddgauss::dgauss::{exact_pmf, DiscreteGaussian, NoiseScale};
use ddgauss::dme::{gaussian_baseline, mean_ci, sample_sphere};
use ddgauss::flatten::{flatten, SignVector};
use ddgauss::rounding::{conditional_round, delta2_bound, grid_norm_sq, round_to_grid, RoundingParams};
use ddgauss::seeds;
use rand::Rng;
use rand_distr::StandardNormal;

fn sq_norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

#[test]
fn sampler_variance_band() {
    let mut rng = seeds::stream("statistics/variance", 0, &[]);
    let samples = 200_000usize;
    for s in [0.5, 1.0, 3f64.sqrt(), 3.0, 10.0] {
        let scale = NoiseScale::new(s).unwrap();
        let xs = DiscreteGaussian::new(scale).sample_vec(samples, &mut rng).unwrap();
        let var = xs.iter().map(|&x| (x * x) as f64).sum::<f64>() / samples as f64;
        let radius = (40.0 * s).ceil() as i64;
        let exact = exact_pmf(scale, radius, 1e-15).unwrap().second_moment();
        let fourth: f64 = xs.iter().map(|&x| ((x * x) as f64).powi(2)).sum::<f64>() / samples as f64;
        let se = ((fourth - var * var) / samples as f64).sqrt();
        assert!(exact <= s * s * (1.0 + 1e-14), "s={s}: exact variance {exact} above s^2");
        assert!((var - exact).abs() <= 4.0 * se, "s={s}: empirical {var}, exact {exact}, se {se}");
        if s >= 1.0 {
            assert!(var > 0.8 * s * s, "s={s}: empirical variance {var} below the sanity band");
        }
        if 4.0 * se < s * s - exact {
            assert!(var < s * s, "s={s}: empirical variance {var} not below {}", s * s);
        }
    }
}

#[test]
fn sampler_matches_exact_pmf_at_scale_three() {
    let mut rng = seeds::stream("statistics/tv", 0, &[]);
    let scale = NoiseScale::new(3.0).unwrap();
    let xs = DiscreteGaussian::new(scale).sample_vec(1_000_000, &mut rng).unwrap();
    let tv = exact_pmf(scale, 120, 1e-15).unwrap().tv_distance_to_samples(&xs);
    assert!(tv <= 0.005, "TV {tv}");
    let mean = xs.iter().sum::<i64>() as f64 / xs.len() as f64;
    assert!(mean.abs() <= 4.0 * 3.0 / 1000.0, "mean {mean}");
}

#[test]
fn rounding_inflates_squared_norm_by_at_most_a_quarter_cell() {
    let mut rng = seeds::stream("statistics/inflation", 0, &[]);
    let d = 256;
    let x: Vec<f64> = (0..d).map(|_| rng.random_range(-3.0..3.0)).collect();
    let trials = 10_000;
    let base = sq_norm(&x);
    let mut total = 0.0;
    for _ in 0..trials {
        let z = round_to_grid(&x, &mut rng);
        total += z.iter().map(|&v| (v * v) as f64).sum::<f64>() - base;
    }
    let inflation = total / trials as f64;
    let limit = d as f64 / 4.0 * (1.0 + 3.0 / (trials as f64).sqrt());
    assert!(inflation <= limit, "inflation {inflation} above {limit}");
}

#[test]
fn conditional_rounding_bias_of_sums() {
    let mut rng = seeds::stream("statistics/conditional-bias", 0, &[]);
    let (n, d, c, gamma) = (20usize, 64usize, 1.0, 0.05);
    let beta = (-0.5f64).exp();
    let params = RoundingParams::new(gamma, beta, d).unwrap();
    let cap = delta2_bound(c, &params).unwrap().delta2_grid;
    let inputs: Vec<Vec<f64>> = sample_sphere(n, d, c / gamma, &mut rng);
    let mut truth = vec![0.0; d];
    for x in &inputs {
        truth.iter_mut().zip(x).for_each(|(t, v)| *t += v);
    }
    let reps = 10_000;
    let mut mean = vec![0.0; d];
    for _ in 0..reps {
        for x in &inputs {
            let r = conditional_round(x, c, &params, &mut rng).unwrap();
            assert!((grid_norm_sq(&r.grid) as f64).sqrt() <= cap);
            for (m, &v) in mean.iter_mut().zip(&r.grid) {
                *m += v as f64 / reps as f64;
            }
        }
    }
    let err = mean.iter().zip(&truth).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt() * gamma;
    let bias = beta * gamma * (d as f64).sqrt() * n as f64 / (1.0 - beta);
    let mc = 3.0 * gamma * (d as f64 * n as f64 / 4.0 / reps as f64).sqrt();
    assert!(err <= bias + mc, "bias {err} above {bias} + {mc}");
}

#[test]
fn flattened_coordinates_have_subgaussian_tails() {
    let mut rng = seeds::stream("statistics/flatten-tail", 0, &[]);
    let d = 1024;
    let raw: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
    let norm = sq_norm(&raw).sqrt();
    let x: Vec<f64> = raw.iter().map(|v| v / norm).collect();
    let draws = 1000u64;
    let threshold = 4.0 / (d as f64).sqrt();
    let mut over = 0usize;
    for seed in 0..draws {
        let xi = SignVector::from_seed(seed, d).unwrap();
        over += flatten(&x, &xi).unwrap().iter().filter(|v| v.abs() > threshold).count();
    }
    let frac = over as f64 / (draws as f64 * d as f64);
    let bound = 2.0 * (-8f64).exp();
    let slack = 3.0 * (bound / (draws as f64 * d as f64)).sqrt();
    assert!(frac <= bound + slack, "tail fraction {frac}");
}

#[test]
fn sphere_sums_are_orthogonal_in_expectation() {
    let (n, d, c, trials) = (100usize, 1024usize, 10.0, 200);
    let mut rng = seeds::stream("statistics/sphere", 0, &[]);
    let mut norms = Vec::with_capacity(trials);
    let mut coord_mean = vec![0.0; d];
    for _ in 0..trials {
        let xs = sample_sphere(n, d, c, &mut rng);
        for x in &xs {
            assert!((sq_norm(x).sqrt() - c).abs() <= 1e-12 * c);
        }
        let mut sum = vec![0.0; d];
        for x in &xs {
            sum.iter_mut().zip(x).for_each(|(s, v)| *s += v);
        }
        coord_mean.iter_mut().zip(&sum).for_each(|(m, s)| *m += s / (n * trials) as f64);
        norms.push(sq_norm(&sum));
    }
    let m = mean_ci(&norms);
    let target = n as f64 * c * c;
    assert!((m.mean - target).abs() <= 3.0 * m.ci.unwrap(), "E|sum|^2 {} vs {target}", m.mean);
    let coord_sd = c / (d as f64).sqrt() / ((n * trials) as f64).sqrt();
    assert!(coord_mean.iter().all(|v| v.abs() <= 5.0 * coord_sd));
}

#[test]
fn gaussian_baseline_error_matches_its_calibration() {
    let (n, d, c, eps, trials) = (100usize, 1024usize, 10.0, 4.0, 100);
    let mut rng = seeds::stream("statistics/baseline", 0, &[]);
    let mut errs = Vec::with_capacity(trials);
    for _ in 0..trials {
        let xs = sample_sphere(n, d, c, &mut rng);
        let mut sum = vec![0.0; d];
        for x in &xs {
            sum.iter_mut().zip(x).for_each(|(s, v)| *s += v);
        }
        let est = gaussian_baseline(&xs, eps, c, &mut rng);
        errs.push(est.iter().zip(&sum).map(|(a, b)| (a - b).powi(2)).sum::<f64>());
    }
    let m = mean_ci(&errs);
    let target = d as f64 * (c / eps).powi(2);
    assert!((m.mean - target).abs() <= 3.0 * m.ci.unwrap(), "baseline MSE {} vs {target}", m.mean);
}
