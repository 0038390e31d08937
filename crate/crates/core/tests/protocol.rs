use std::collections::HashMap;

use ddgauss::accountant::{choose_gamma, CommBudget, NormMode};
use ddgauss::dgauss::{exact_pmf, NoiseScale};
use ddgauss::dme::{run_dme, sample_sphere, DmeConfig};
use ddgauss::flatten::flatten;
use ddgauss::modular::{mod_clip_error_bound, secagg_sum, Modulus};
use ddgauss::protocol::{client_encode, run_round, server_decode, theoretical_mse_bound, ProtocolConfig, ProtocolParams};
use ddgauss::rounding::delta2_bound;
use ddgauss::seeds;

fn params(n: usize, d: usize, gamma: f64, sigma: f64, beta: f64, bits: u32, seed: u64) -> ProtocolParams {
    ProtocolParams {
        n,
        d,
        c: 1.0,
        gamma,
        modulus: Modulus::from_bits(bits).unwrap(),
        sigma,
        beta,
        master_seed: seed,
        round: 0,
    }
}

fn sum_of(inputs: &[Vec<f64>]) -> Vec<f64> {
    let mut s = vec![0.0; inputs[0].len()];
    for x in inputs {
        s.iter_mut().zip(x).for_each(|(a, b)| *a += b);
    }
    s
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

/// Exact law of one client's message at `d = 2`, enumerated over rounding
/// outcomes, noise values and the modulus.
fn brute_force_message_law(x: &[f64], cfg: &ProtocolConfig) -> HashMap<(u64, u64), f64> {
    let p = cfg.params();
    let xi = cfg.sign_vector();
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let f = if norm > p.c { p.c / norm } else { 1.0 } / p.gamma;
    let scaled: Vec<f64> = x.iter().map(|v| v * f).collect();
    let y = flatten(&scaled, &xi).unwrap();
    let cap = delta2_bound(p.c, &cfg.rounding()).unwrap().delta2_grid;

    let mut outcomes = Vec::new();
    for bits in 0..4u32 {
        let mut z = [0i64; 2];
        let mut prob = 1.0;
        for i in 0..2 {
            let lo = y[i].floor();
            let frac = y[i] - lo;
            let up = (bits >> i) & 1 == 1;
            z[i] = lo as i64 + up as i64;
            prob *= if up { frac } else { 1.0 - frac };
        }
        let norm_sq = (z[0] * z[0] + z[1] * z[1]) as f64;
        if prob > 0.0 && (p.beta == 0.0 || norm_sq <= cap * cap) {
            outcomes.push((z, prob));
        }
    }
    let accepted: f64 = outcomes.iter().map(|(_, q)| q).sum();

    let scale = NoiseScale::new(p.sigma / p.gamma).unwrap();
    let pmf = exact_pmf(scale, 40, 1e-15).unwrap();
    let m = p.modulus;
    let mut law = HashMap::new();
    for (z, q) in &outcomes {
        for (e0, p0) in pmf.iter() {
            for (e1, p1) in pmf.iter() {
                let key = (m.reduce((z[0] + e0) as i128), m.reduce((z[1] + e1) as i128));
                *law.entry(key).or_insert(0.0) += q / accepted * p0 * p1;
            }
        }
    }
    law
}

#[test]
fn single_client_message_matches_brute_force() {
    let cfg = ProtocolConfig::new(ProtocolParams {
        c: 2.0,
        ..params(1, 2, 1.0, 0.6, (-0.5f64).exp(), 2, 7)
    })
    .unwrap();
    let x = [2.0, 0.0];
    let law = brute_force_message_law(&x, &cfg);
    let xi = cfg.sign_vector();
    let runs = 100_000;
    let mut rng = seeds::stream("protocol/marginal", 0, &[]);
    let mut counts: HashMap<(u64, u64), usize> = HashMap::new();
    for _ in 0..runs {
        let (z, _) = client_encode(&x, &cfg, &xi, &mut rng).unwrap();
        *counts.entry((z.residues()[0], z.residues()[1])).or_insert(0) += 1;
    }
    let tv = 0.5
        * law
            .iter()
            .map(|(k, &p)| (p - *counts.get(k).unwrap_or(&0) as f64 / runs as f64).abs())
            .sum::<f64>();
    assert!(counts.keys().all(|k| law.contains_key(k)));
    assert!(tv <= 0.01, "TV {tv}");
}

#[test]
fn zero_inputs_leave_only_noise() {
    let (n, d, gamma, sigma, beta) = (3usize, 256usize, 0.1, 0.2, (-0.5f64).exp());
    let rounds = 400u64;
    let zeros = vec![vec![0.0; d]; n];
    let mut total = 0.0;
    for r in 0..rounds {
        let cfg = ProtocolConfig::new(ProtocolParams {
            round: r,
            ..params(n, d, gamma, sigma, beta, 40, 11)
        })
        .unwrap();
        total += run_round(&zeros, &cfg).unwrap().estimate.iter().map(|v| v * v).sum::<f64>();
    }
    let mse = total / rounds as f64;
    let limit = (n * d) as f64 * sigma * sigma + gamma * gamma * (d * n) as f64 / (4.0 * (1.0 - beta));
    let slack = 1.0 + 4.0 * (2.0 / (n * d) as f64 / rounds as f64).sqrt();
    assert!(mse <= limit * slack, "E|est|^2 = {mse}, limit {limit}");
}

#[test]
fn noiseless_error_is_rounding_variance_plus_bias() {
    let (n, d, gamma, beta, trials) = (20usize, 256usize, 0.05, (-0.5f64).exp(), 200u64);
    let mut total = 0.0;
    for t in 0..trials {
        let mut rng = seeds::stream("protocol/noiseless", 0, &[t]);
        let inputs = sample_sphere(n, d, 1.0, &mut rng);
        let cfg = ProtocolConfig::noiseless(params(n, d, gamma, 0.0, beta, 48, t)).unwrap();
        total += sq_dist(&run_round(&inputs, &cfg).unwrap().estimate, &sum_of(&inputs));
    }
    let mse = total / trials as f64;
    let var = gamma * gamma * (d * n) as f64 / (4.0 * (1.0 - beta));
    let bias = beta * gamma * (d as f64).sqrt() * n as f64 / (1.0 - beta);
    let limit = var * (1.0 + 5.0 / (trials as f64).sqrt()) + bias * bias;
    assert!(mse <= limit, "E|est - sum|^2 = {mse}, limit {limit}");
}

#[test]
fn estimate_is_unbiased_without_wraparound() {
    let (n, d, gamma, sigma, rounds) = (10usize, 64usize, 0.1, 0.1, 2000u64);
    let mut rng = seeds::stream("protocol/unbiased", 0, &[]);
    let inputs = sample_sphere(n, d, 1.0, &mut rng);
    let truth = sum_of(&inputs);
    let mut mean = vec![0.0; d];
    for r in 0..rounds {
        let cfg = ProtocolConfig::new(ProtocolParams {
            round: r,
            ..params(n, d, gamma, sigma, 0.0, 40, 5)
        })
        .unwrap();
        let out = run_round(&inputs, &cfg).unwrap();
        assert_eq!(out.diagnostics.wraparound_coords, 0);
        mean.iter_mut().zip(&out.estimate).for_each(|(m, e)| *m += e / rounds as f64);
    }
    let per_coord = n as f64 * (gamma * gamma / 4.0 + sigma * sigma);
    let expected = d as f64 * per_coord / rounds as f64;
    let err = sq_dist(&mean, &truth);
    assert!(err <= expected * (1.0 + 5.0 * (2.0 / d as f64).sqrt()), "{err} vs {expected}");
}

#[test]
fn server_decode_agrees_with_plain_modular_sum() {
    let (n, d) = (4usize, 16usize);
    let cfg = ProtocolConfig::new(params(n, d, 0.1, 0.1, 0.0, 12, 3)).unwrap();
    let xi = cfg.sign_vector();
    let mut rng = seeds::stream("protocol/decode", 0, &[]);
    let inputs = sample_sphere(n, d, 1.0, &mut rng);
    let msgs: Vec<_> = inputs
        .iter()
        .map(|x| client_encode(x, &cfg, &xi, &mut rng).unwrap().0)
        .collect();
    let plain = server_decode(&secagg_sum(&msgs, false, &mut rng).unwrap(), &cfg, &xi).unwrap();
    let masked = server_decode(&secagg_sum(&msgs, true, &mut rng).unwrap(), &cfg, &xi).unwrap();
    assert_eq!(plain, masked);
    let reversed: Vec<_> = msgs.iter().rev().cloned().collect();
    let rev = server_decode(&secagg_sum(&reversed, false, &mut rng).unwrap(), &cfg, &xi).unwrap();
    assert_eq!(plain, rev);
}

#[test]
fn wraparound_becomes_rarer_as_k_grows() {
    let cfg = DmeConfig {
        n: 100,
        d: 1024,
        c: 10.0,
        eps_targets: vec![4.0],
        delta: 1e-5,
        bit_widths: vec![10],
        k_values: vec![2.0, 3.0, 4.0],
        norm_mode: NormMode::Optimistic,
        trials: 20,
        beta: (-0.5f64).exp(),
        master_seed: 0,
    };
    let rows = run_dme(&cfg).unwrap();
    let rounds: Vec<f64> = rows.iter().map(|r| r.wraparound_round_rate.unwrap()).collect();
    let coords: Vec<f64> = rows.iter().map(|r| r.wraparound_rate.unwrap()).collect();
    assert!(rounds.windows(2).all(|w| w[1] <= w[0]), "round rates {rounds:?}");
    assert!(rounds[2] < rounds[0], "round rates {rounds:?}");
    assert!(coords.windows(2).all(|w| w[1] < w[0]), "coordinate rates {coords:?}");
}

#[test]
fn wraparound_error_at_k4_stays_within_the_clip_bound() {
    let (n, d, c, eps, bits, k) = (100usize, 1024usize, 10.0, 4.0, 10u32, 4.0);
    let budget = CommBudget::new(bits, k, NormMode::Optimistic).unwrap();
    let choice = choose_gamma(&budget, eps, c, 0.0, n as u64, d as u64, 1e-5).unwrap();
    let make = |b: u32, t: u64| {
        ProtocolConfig::new(ProtocolParams {
            n,
            d,
            c,
            gamma: choice.gamma,
            modulus: Modulus::from_bits(b).unwrap(),
            sigma: choice.sigma,
            beta: 0.0,
            master_seed: t,
            round: 0,
        })
        .unwrap()
    };
    let trials = 30u64;
    let mut wrap_sq = 0.0;
    for t in 0..trials {
        let mut rng = seeds::stream("protocol/clip", 0, &[t]);
        let inputs = sample_sphere(n, d, c, &mut rng);
        let narrow = run_round(&inputs, &make(bits, t)).unwrap().estimate;
        let wide = run_round(&inputs, &make(62, t)).unwrap().estimate;
        wrap_sq += sq_dist(&narrow, &wide);
    }
    let per_coord = wrap_sq / (trials as f64 * d as f64) / (choice.gamma * choice.gamma);
    let cfg = make(bits, 0);
    let sigma_hat = theoretical_mse_bound(&cfg, c * (n as f64).sqrt()).sigma_hat_sq.sqrt() / choice.gamma;
    let r = cfg.modulus().m() as f64 / 2.0;
    let bound = mod_clip_error_bound(r, sigma_hat, 0.0).unwrap();
    assert!(per_coord <= bound.sq_bound, "measured {per_coord}, bound {}", bound.sq_bound);
}
