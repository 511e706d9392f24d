use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use riemann_doa::analysis::{mu_euclidean, mu_riemannian};
use riemann_doa::beam::{threshold_count, SubspaceDimRule};
use riemann_doa::experiment::percentile;
use riemann_doa::hpd::random::{random_hpd, random_invertible};
use riemann_doa::hpd::*;

fn pair(seed: u64, n: usize) -> (HpdMatrix, HpdMatrix) {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    (random_hpd(&mut r, n, 2.0), random_hpd(&mut r, n, 2.0))
}

fn rel(a: &HpdMatrix, b: &HpdMatrix) -> f64 {
    (a.as_matrix() - b.as_matrix()).norm() / b.norm_fro()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn distance_is_a_symmetric_congruence_invariant(seed in any::<u64>(), n in 2usize..8) {
        let (a, b) = pair(seed, n);
        let d = affine_invariant_distance(&a, &b).unwrap();
        prop_assert!(d > 0.0);
        prop_assert!((d - affine_invariant_distance(&b, &a).unwrap()).abs() <= 1e-9 * d);
        prop_assert!(affine_invariant_distance(&a, &a).unwrap() < 1e-9);
        let t = random_invertible(&mut ChaCha8Rng::seed_from_u64(!seed), n);
        let d2 = affine_invariant_distance(&a.congruence(&t).unwrap(), &b.congruence(&t).unwrap()).unwrap();
        prop_assert!((d - d2).abs() <= 1e-7 * d.max(1.0));
    }

    #[test]
    fn exp_inverts_log(seed in any::<u64>(), n in 2usize..8) {
        let (a, b) = pair(seed, n);
        let back = exp_map(&a, &log_map(&a, &b).unwrap()).unwrap();
        prop_assert!(rel(&back, &b) < 1e-10);
    }

    #[test]
    fn geodesic_point_splits_distance(seed in any::<u64>(), n in 2usize..6, t in 0.0f64..1.0) {
        let (a, b) = pair(seed, n);
        let p = geodesic_point(&a, &b, t).unwrap();
        let d = affine_invariant_distance(&a, &b).unwrap();
        prop_assert!((affine_invariant_distance(&a, &p).unwrap() - t * d).abs() < 1e-8 * d.max(1.0));
        prop_assert!((affine_invariant_distance(&p, &b).unwrap() - (1.0 - t) * d).abs() < 1e-8 * d.max(1.0));
    }

    #[test]
    fn karcher_mean_is_invariant_to_order_and_congruence(seed in any::<u64>(), n in 2usize..6, k in 2usize..6) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let ms: Vec<HpdMatrix> = (0..k).map(|_| random_hpd(&mut r, n, 1.5)).collect();
        let cfg = MeanConfig::default();
        let g = karcher_mean(&ms, &cfg).unwrap().mean;
        let rev: Vec<HpdMatrix> = ms.iter().rev().cloned().collect();
        prop_assert!(rel(&karcher_mean(&rev, &cfg).unwrap().mean, &g) < 1e-7);
        let t = random_invertible(&mut r, n);
        let moved: Vec<HpdMatrix> = ms.iter().map(|m| m.congruence(&t).unwrap()).collect();
        let expected = g.congruence(&t).unwrap();
        prop_assert!(rel(&karcher_mean(&moved, &cfg).unwrap().mean, &expected) < 1e-6);
    }

    #[test]
    fn riemannian_coefficient_never_exceeds_euclidean(
        log_s in -3.0f64..6.0,
        log_h in -1.0f64..2.0,
        log_v in -6.0f64..1.0,
        tau in 0.01f64..0.99,
    ) {
        let (s, h, v) = (10f64.powf(log_s), 10f64.powf(log_h), 10f64.powf(log_v));
        prop_assert!(mu_riemannian(s, h, v, tau) <= mu_euclidean(s, tau) * (1.0 + 1e-12));
    }

    #[test]
    fn subspace_dimension_stays_in_range(values in prop::collection::vec(0.0f64..10.0, 2..16)) {
        for rule in [SubspaceDimRule::MeanMatrix, SubspaceDimRule::PerSegment, SubspaceDimRule::Oracle(99)] {
            let k = threshold_count(&values, rule);
            prop_assert!(k >= 1 && k < values.len());
        }
    }

    #[test]
    fn percentiles_are_ordered(values in prop::collection::vec(-1e3f64..1e3, 1..40), q in 0.0f64..100.0) {
        let lo = percentile(&values, 0.0).unwrap();
        let hi = percentile(&values, 100.0).unwrap();
        let p = percentile(&values, q).unwrap();
        prop_assert!(lo <= p && p <= hi);
    }
}
