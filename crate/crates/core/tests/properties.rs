use ddgauss::accountant::{epsilon_zcdp, tau, zcdp_to_dp, zcdp_to_dp_closed_form};
use ddgauss::flatten::{flatten, unflatten, wht, Direction, SignVector};
use ddgauss::modular::{center, mod_clip_real, mod_reduce, secagg_sum, Modulus, ResidueVector};
use ddgauss::rounding::{delta2_bound, randomized_round, RoundingParams};
use ddgauss::seeds;
use proptest::prelude::*;

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Dyadic reals keep every transform below exact in f64.
fn dyadic_vec(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec((-1024i32..1024).prop_map(|v| v as f64 / 8.0), len)
}

proptest! {
    #[test]
    fn reduction_is_additive(
        a in prop::collection::vec(-1_000_000i64..1_000_000, 8),
        b in prop::collection::vec(-1_000_000i64..1_000_000, 8),
        bits in 1u32..40,
    ) {
        let m = Modulus::from_bits(bits).unwrap();
        let sum: Vec<i64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        let (ra, rb, rs) = (mod_reduce(&a, m), mod_reduce(&b, m), mod_reduce(&sum, m));
        for i in 0..8 {
            let lhs = (ra.residues()[i] + rb.residues()[i]) % m.m();
            prop_assert_eq!(lhs, rs.residues()[i]);
        }
    }

    #[test]
    fn reduction_commutes_with_scaling(a in prop::collection::vec(-100_000i64..100_000, 6), k in -50i64..50) {
        let m = Modulus::new(1 << 12).unwrap();
        let scaled: Vec<i64> = a.iter().map(|x| k * x).collect();
        let ra = mod_reduce(&a, m);
        let rk = mod_reduce(&scaled, m);
        for i in 0..6 {
            prop_assert_eq!(m.reduce(k as i128 * ra.residues()[i] as i128), rk.residues()[i]);
        }
    }

    #[test]
    fn center_inverts_reduce_on_the_window(bits in 1u32..62, raw in prop::collection::vec(any::<i64>(), 5)) {
        let m = Modulus::from_bits(bits).unwrap();
        let half = m.half() as i128;
        let v: Vec<i64> = raw.iter().map(|&x| ((x as i128).rem_euclid(m.m() as i128) - half + 1) as i64).collect();
        prop_assert_eq!(center(&mod_reduce(&v, m)), v);
    }

    #[test]
    fn mod_clip_real_lands_in_range(x in -1e6f64..1e6, a in -100f64..0.0, w in 0.5f64..100.0) {
        let y = mod_clip_real(x, a, a + w).unwrap();
        prop_assert!(y >= a && y < a + w);
        let k = (x - y) / w;
        prop_assert!((k - k.round()).abs() < 1e-6 * (1.0 + k.abs()));
    }

    #[test]
    fn centering_agrees_with_real_modular_clipping(v in -100_000i64..100_000, bits in 1u32..12, g in -6i32..4) {
        let m = Modulus::from_bits(bits).unwrap();
        let gamma = 2f64.powi(g);
        let mf = m.m() as f64;
        let centered = center(&mod_reduce(&[v], m))[0] as f64 * gamma;
        let shifted = mod_clip_real(v as f64 * gamma, gamma * (0.5 - mf / 2.0), gamma * (0.5 + mf / 2.0)).unwrap();
        prop_assert_eq!(centered, shifted);
        let plain = mod_clip_real(v as f64 * gamma, -gamma * mf / 2.0, gamma * mf / 2.0).unwrap();
        if centered == gamma * mf / 2.0 {
            prop_assert_eq!(plain, -centered);
        } else {
            prop_assert_eq!(plain, centered);
        }
    }

    #[test]
    fn flatten_is_linear_and_invertible(x in dyadic_vec(64), y in dyadic_vec(64), seed in any::<u64>()) {
        let xi = SignVector::from_seed(seed, 64).unwrap();
        let fx = flatten(&x, &xi).unwrap();
        let fy = flatten(&y, &xi).unwrap();
        let sum: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a + b).collect();
        let fsum = flatten(&sum, &xi).unwrap();
        for i in 0..64 {
            prop_assert!((fsum[i] - fx[i] - fy[i]).abs() <= 1e-9);
        }
        prop_assert!((norm(&fx) - norm(&x)).abs() <= 1e-9 * (1.0 + norm(&x)));
        let back = unflatten(&fx, &xi).unwrap();
        for i in 0..64 {
            prop_assert!((back[i] - x[i]).abs() <= 1e-9);
        }
    }

    #[test]
    fn wht_is_an_involution(x in dyadic_vec(32)) {
        let mut z = x.clone();
        wht(&mut z, Direction::Forward).unwrap();
        wht(&mut z, Direction::Inverse).unwrap();
        for (a, b) in x.iter().zip(&z) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn sensitivity_grows_with_clip_norm(c in 0.01f64..100.0, extra in 0.0f64..10.0, gamma in 1e-3f64..1.0, d in 1usize..4096) {
        let beta = (-0.5f64).exp();
        let p = RoundingParams::new(gamma, beta, d).unwrap();
        let lo = delta2_bound(c, &p).unwrap().delta2;
        let hi = delta2_bound(c + extra, &p).unwrap().delta2;
        prop_assert!(hi >= lo);
        prop_assert!(lo >= c);
        let worst = RoundingParams::new(gamma, 0.0, d).unwrap();
        prop_assert!(delta2_bound(c, &worst).unwrap().delta2 >= lo * (1.0 - 1e-12));
    }

    #[test]
    fn conversion_is_dominated_and_monotone(lr in -6.0f64..1.0, ld in -12.0f64..-1.0, step in 0.01f64..1.0) {
        let (rho, delta) = (10f64.powf(lr), 10f64.powf(ld));
        let e = zcdp_to_dp(rho, delta).unwrap();
        prop_assert!(e <= zcdp_to_dp_closed_form(rho, delta));
        prop_assert!(zcdp_to_dp(rho * (1.0 + step), delta).unwrap() >= e * (1.0 - 1e-9));
        prop_assert!(zcdp_to_dp(rho, delta * (1.0 + step)).unwrap() <= e * (1.0 + 1e-9));
    }

    #[test]
    fn tau_shrinks_with_noise_and_grows_with_clients(s in 0.5f64..3.0, ds in 0.01f64..1.0, n in 2u64..200) {
        let t = tau(s, n).unwrap();
        prop_assert!(tau(s + ds, n).unwrap() <= t);
        prop_assert!(tau(s, n + 1).unwrap() >= t);
    }

    #[test]
    fn epsilon_shrinks_with_more_noise(sigma in 0.5f64..20.0, n in 2u64..1000, d in 1u64..2048) {
        let a = epsilon_zcdp(1.0, sigma, 1.0, n, d, None).unwrap().eps;
        let b = epsilon_zcdp(1.0, sigma * 1.1, 1.0, n, d, None).unwrap().eps;
        prop_assert!(b <= a);
    }

    #[test]
    fn randomized_rounding_stays_on_adjacent_grid_points(x in prop::collection::vec(-50f64..50.0, 16), gamma in 1e-3f64..2.0, seed in any::<u64>()) {
        let mut rng = seeds::stream("properties/round", seed, &[]);
        let y = randomized_round(&x, gamma, &mut rng).unwrap();
        for (a, b) in x.iter().zip(&y) {
            prop_assert!((a - b).abs() < gamma * (1.0 + 1e-9));
            let k = b / gamma;
            prop_assert!((k - k.round()).abs() < 1e-6);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn masking_never_changes_the_sum(
        msgs in prop::collection::vec(prop::collection::vec(0u64..16, 4), 3),
        seed in any::<u64>(),
    ) {
        let m = Modulus::new(16).unwrap();
        let vs: Vec<ResidueVector> = msgs.into_iter().map(|r| ResidueVector::from_residues(r, m).unwrap()).collect();
        let mut rng = seeds::stream("properties/secagg", seed, &[]);
        let plain = secagg_sum(&vs, false, &mut rng).unwrap();
        let masked = secagg_sum(&vs, true, &mut rng).unwrap();
        prop_assert_eq!(plain, masked);
    }
}
