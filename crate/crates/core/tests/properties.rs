//! Randomized invariants of the building blocks.

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rsfl_core::adversary::{barrage_for, worst_case};
use rsfl_core::bounds::{clip_gradient, norm, quadratic_root};
use rsfl_core::channel::{realize_channels, sample_doas, steering_vector};
use rsfl_core::config::parse_config_str;
use rsfl_core::experiment::format_number;
use rsfl_core::harness::SymbolMap;
use rsfl_core::linalg::{is_psd, scaled_identity};
use rsfl_core::optimizer::{optimize_against, waterfill, OptimizerSettings};

proptest! {
    #[test]
    fn waterfill_spends_budget_and_orders_powers(
        lambdas in prop::collection::vec(0.0f64..50.0, 1..12),
        power in 1e-3f64..10.0,
    ) {
        let wf = waterfill(&lambdas, power);
        let total: f64 = wf.powers.iter().sum();
        prop_assert!(wf.powers.iter().all(|p| *p >= 0.0));
        if lambdas.iter().any(|l| *l > 0.0) {
            prop_assert!((total - power).abs() <= 1e-9 * power);
        }
        for i in 0..lambdas.len() {
            for j in 0..lambdas.len() {
                if lambdas[i] > lambdas[j] {
                    prop_assert!(wf.powers[i] >= wf.powers[j] - 1e-12);
                }
            }
        }
    }

    #[test]
    fn clipping_bounds_norm_and_keeps_direction(
        g in prop::collection::vec(-100.0f64..100.0, 1..32),
        tau in 1e-3f64..10.0,
    ) {
        let c = clip_gradient(&g, tau);
        prop_assert!(norm(&c) <= tau * (1.0 + 1e-12) || c == g);
        prop_assert_eq!(clip_gradient(&c, tau), c.clone());
        let dot: f64 = c.iter().zip(&g).map(|(a, b)| a * b).sum();
        prop_assert!(dot >= -1e-12);
    }

    #[test]
    fn quadratic_root_is_positive_and_solves(
        g in 1e-4f64..1e4, d in 1e-4f64..1e4, e in 1e-4f64..1e4,
    ) {
        let y = quadratic_root(g, d, e);
        prop_assert!(y > 0.0);
        prop_assert!((d * y * y + g * y - e).abs() <= 1e-12 * e.max(g * y).max(d * y * y));
    }

    #[test]
    fn csv_numbers_keep_six_digits(x in -1e12f64..1e12) {
        let s = format_number(x);
        let back: f64 = s.parse().unwrap();
        prop_assert!((back - x).abs() <= 5e-6 * x.abs() + f64::MIN_POSITIVE);
    }

    #[test]
    fn steering_vectors_have_unit_modulus(theta in -1.5f64..1.5, n in 1usize..32) {
        let a = steering_vector(theta, n);
        prop_assert!(a.iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn symbol_map_round_trips(seed in 0u64..1000, tokens in 1usize..20) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dim = 8;
        let data: Vec<Vec<f64>> = (0..tokens)
            .map(|_| (0..dim).map(|_| rand::Rng::random_range(&mut rng, -2.0..2.0)).collect())
            .collect();
        let refs: Vec<&[f64]> = data.iter().map(|t| t.as_slice()).collect();
        let map = SymbolMap::fit(&refs, dim, tokens * dim / 2, &mut rng);
        let stream = map.to_stream(&refs);
        let energy_in: f64 = data.iter().flatten().map(|x| x * x).sum();
        let energy_out: f64 = stream.iter().map(|z| z.norm_sqr()).sum();
        prop_assert!((energy_in - energy_out).abs() <= 1e-9 * energy_in.max(1.0));
        let back = map.from_stream(&stream);
        for (a, b) in data.iter().zip(&back) {
            for (x, y) in a.iter().zip(b) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn allocations_and_jammers_are_feasible(seed in 0u64..10_000) {
        let cfg = parse_config_str("[wireless]\nQ = 3\nN_T = 2\nN_R = 4\nN_J = 8\nN = 4\nK = 2\nP_J = 40\n").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let doas = sample_doas(&cfg, &mut rng);
        let ch = realize_channels(&cfg, &doas, &mut rng).unwrap();
        let white = vec![scaled_identity(cfg.rx_antennas, cfg.noise_power); cfg.resource_elements()];
        let (alloc, rep) = optimize_against(&ch, cfg.user_power, cfg.blocks_per_user(), &white, OptimizerSettings::default()).unwrap();
        prop_assert!(alloc.check_constraints(cfg.blocks_per_user(), cfg.user_power).is_ok());
        for pair in rep.rate_trajectory.windows(2).skip(1) {
            prop_assert!(pair[1] >= pair[0] * (1.0 - 1e-6));
        }
        let (jam, _) = worst_case(&ch, &alloc, cfg.jammer_power).unwrap();
        prop_assert!(jam.check_constraints(cfg.jammer_power).is_ok());
        prop_assert!(jam.c_u.iter().all(|c| is_psd(c, 1e-9)));
        let flat = barrage_for(cfg.jammer_antennas, cfg.resource_elements(), cfg.jammer_power);
        prop_assert!((flat.total_power() - cfg.jammer_power).abs() <= 1e-9 * cfg.jammer_power);
    }
}
