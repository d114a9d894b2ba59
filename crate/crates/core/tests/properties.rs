use emhd_core::checkpoint::{decode, encode, CheckpointMeta};
use emhd_core::config::{parse_config, RunConfig};
use emhd_core::hall::hall_term;
use emhd_core::integrator::{InitialData, Scheme};
use emhd_core::littlewood_paley::{bony_decompose, DyadicProfile, BlockDecomposition};
use emhd_core::noise::{build_noise_basis, transport_apply};
use emhd_core::oracles::brute_product;
use emhd_core::random::random_field;
use emhd_core::spectral::{
    curl, dealiased_product, forward_transform, inverse_transform, leray_project, smooth_even_at_least, ProductOp,
};
use proptest::prelude::*;
use std::path::Path;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn grid_round_trip_is_exact(n in 1usize..6, seed in any::<u64>(), extra in 0usize..5) {
        let f = random_field(n, seed, 1.0, false);
        let m = smooth_even_at_least(2 * n + 1 + extra);
        let back = forward_transform(&inverse_transform(&f, m).unwrap(), n).unwrap();
        prop_assert!((&back - &f).max_abs() <= 1e-13 * f.max_abs().max(1e-300));
    }

    #[test]
    fn leray_projection_is_idempotent_and_solenoidal(n in 1usize..7, seed in any::<u64>()) {
        let f = random_field(n, seed, 0.5, false);
        let p = leray_project(&f);
        prop_assert!(p.divergence_residual() <= 1e-13 * f.max_abs());
        prop_assert!((&leray_project(&p) - &p).max_abs() <= 1e-14 * f.max_abs());
        prop_assert!(p.l2_norm() <= f.l2_norm() * (1.0 + 1e-14));
    }

    #[test]
    fn curl_of_a_field_is_solenoidal(n in 1usize..7, seed in any::<u64>()) {
        let c = curl(&random_field(n, seed, 1.0, false));
        prop_assert!(c.divergence_residual() <= 1e-12 * c.max_abs().max(1e-300));
    }

    #[test]
    fn hall_term_is_orthogonal_to_the_field(n in 2usize..7, seed in any::<u64>(), decay in 0.0f64..3.0) {
        let b = random_field(n, seed, decay, true);
        let h = hall_term(&b).unwrap();
        let scale = curl(&b).l2_norm() * b.inner(&b);
        prop_assert!(h.inner(&b).abs() <= 1e-12 * scale);
    }

    #[test]
    fn transport_is_skew_for_solenoidal_coefficients(n in 2usize..6, seed in any::<u64>()) {
        let basis = build_noise_basis(3, 6.0, 3.0, n, seed).unwrap();
        let b = random_field(n, seed ^ 1, 1.0, true);
        for e in basis.elements() {
            let t = transport_apply(e.field(), &b).unwrap();
            prop_assert!(t.inner(&b).abs() <= 1e-12 * t.l2_norm() * b.l2_norm());
        }
    }

    #[test]
    fn dealiased_products_match_convolution(n in 1usize..4, seed in any::<u64>()) {
        let f = random_field(n, seed, 0.0, false);
        let g = random_field(n, seed.wrapping_add(1), 0.0, false);
        for op in [ProductOp::Cross, ProductOp::Dot] {
            let fast = dealiased_product(&f, &g, op).unwrap();
            let slow = brute_product(&f, &g, op);
            prop_assert!((&fast - &slow).max_abs() <= 1e-12 * slow.max_abs().max(1e-300));
        }
    }

    #[test]
    fn littlewood_paley_blocks_sum_back(n in 1usize..10, seed in any::<u64>()) {
        let profile = DyadicProfile::default();
        let f = random_field(n, seed, 1.0, false);
        let lp = BlockDecomposition::new(&f, &profile);
        prop_assert!((&lp.reconstruct() - &f).max_abs() <= 1e-14 * f.max_abs());
        let g = random_field(n, seed ^ 7, 1.0, false);
        let bony = bony_decompose(&f, &g, &profile).unwrap();
        let direct = dealiased_product(&f, &g, ProductOp::Dot).unwrap();
        prop_assert!((&bony.sum() - &direct).max_abs() <= 1e-12 * direct.max_abs());
    }

    #[test]
    fn checkpoints_round_trip_bit_exactly(n in 1usize..6, seed in any::<u64>(), t in 0.0f64..10.0) {
        let b = random_field(n, seed, 1.0, true);
        let basis = build_noise_basis(2, 6.0, 3.0, n, seed).unwrap();
        let meta = CheckpointMeta { alpha: 1.5, mu: 1.0, r: 1.0, s: 3.1, t, seed, path_id: seed % 17 };
        let c = decode(&encode(&meta, &b, &basis), Path::new("mem")).unwrap();
        prop_assert_eq!(c.b, b);
        prop_assert_eq!(c.header.t.to_bits(), t.to_bits());
        prop_assert_eq!(c.basis.len(), basis.len());
    }

    #[test]
    fn configs_round_trip_through_toml(
        alpha in 1.01f64..=2.0,
        mu in 0.0f64..5.0,
        n in 1usize..20,
        steps in 1u32..100,
        heun in any::<bool>(),
        amplitude in 0.0f64..2.0,
        seed in 0u64..1_000_000,
    ) {
        let mut cfg = RunConfig::default();
        cfg.solver.alpha = alpha;
        cfg.solver.mu = mu;
        cfg.solver.n = n;
        cfg.solver.dt = 0.01;
        cfg.solver.t_final = 0.01 * steps as f64;
        cfg.solver.scheme = if heun { Scheme::StratonovichHeun } else { Scheme::ExponentialEm };
        cfg.solver.initial = InitialData::Random { amplitude, seed, decay: None };
        prop_assert_eq!(parse_config(&cfg.to_toml()).unwrap(), cfg);
    }
}
