use faer::Side;
use proptest::prelude::*;

use rmps_core::compress::compress;
use rmps_core::model::{Sigma, SpinModel};
use rmps_core::mpo::{build_filter, filter_coefficients};
use rmps_core::mps::{canonicalize, inner_product, random_mps, to_dense, Direction, Mps};
use rmps_core::oracle::{diagonalize, filter_weights};
use rmps_core::rng::derive_stream;
use rmps_core::stats::{fit_gaussian, ks_statistic};
use rmps_core::C64;

const CAP: usize = 1 << 12;

fn state(seed: u64, n: usize, chi: usize) -> Mps {
    random_mps(&mut derive_stream(seed, 1), n, 2, chi).unwrap()
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn random_states_are_normalized(seed in any::<u64>(), n in 2usize..9, chi in 1usize..9) {
        let s = state(seed, n, chi);
        prop_assert!((s.norm() - 1.0).abs() < 1e-12);
        prop_assert!(s.max_bond() <= chi);
    }

    #[test]
    fn canonical_forms_keep_the_vector(seed in any::<u64>(), n in 2usize..9, chi in 1usize..9) {
        let s = state(seed, n, chi);
        let v = to_dense(&s, CAP).unwrap();
        for dir in [Direction::Left, Direction::Right] {
            let c = canonicalize(&s, dir);
            let w = to_dense(&c, CAP).unwrap();
            let diff = v.iter().zip(&w).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            prop_assert!(diff < 1e-12, "{dir:?}: {diff}");
        }
        prop_assert!(canonicalize(&s, Direction::Left).left_canonical_residual(0..n - 1) < 1e-12);
        prop_assert!(canonicalize(&s, Direction::Right).right_canonical_residual(1..n) < 1e-12);
    }

    #[test]
    fn inner_product_matches_dense(a in any::<u64>(), b in any::<u64>(), n in 2usize..8, chi in 1usize..6) {
        let x = state(a, n, chi);
        let y = state(b, n, chi + 1);
        let mps = inner_product(&x, &y).unwrap();
        let reverse = inner_product(&y, &x).unwrap();
        let exact = dot(&to_dense(&x, CAP).unwrap(), &to_dense(&y, CAP).unwrap());
        prop_assert!((mps - exact).norm() < 1e-12);
        prop_assert!((mps - reverse.conj()).norm() < 1e-12);
    }

    #[test]
    fn compression_to_own_bond_is_lossless(seed in any::<u64>(), n in 2usize..9, chi in 1usize..9) {
        let s = canonicalize(&state(seed, n, chi), Direction::Right);
        let out = compress(&s, s.max_bond(), 1e-12).unwrap();
        let v = to_dense(&s, CAP).unwrap();
        let w = to_dense(&out.state, CAP).unwrap();
        let fidelity = dot(&v, &w).norm_sqr() / (dot(&v, &v).re * dot(&w, &w).re);
        prop_assert!(fidelity > 1.0 - 1e-10, "{fidelity}");
        prop_assert!(out.state.max_bond() <= s.max_bond());
    }

    #[test]
    fn filter_coefficients_reproduce_the_parabola(e in -10.0f64..10.0, sigma in 0.5f64..40.0, x in -50.0f64..50.0) {
        let [a, b, c] = filter_coefficients(e, sigma);
        let direct = 1.0 - ((x - e) / sigma).powi(2);
        prop_assert!((a + b * x + c * x * x - direct).abs() < 1e-9 * (1.0 + direct.abs()));
    }

    #[test]
    fn gaussian_fit_moments(xs in prop::collection::vec(-100.0f64..100.0, 2..60)) {
        let fit = fit_gaussian(&xs).unwrap();
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        prop_assert!((fit.mean - mean).abs() < 1e-9);
        prop_assert!(fit.variance >= 0.0);
        if let Some(d) = fit.ks_statistic {
            prop_assert!((0.0..=1.0).contains(&d));
        }
    }

    #[test]
    fn ks_distance_is_bounded(xs in prop::collection::vec(0.0f64..1.0, 1..80)) {
        let d = ks_statistic(&xs, |x| x);
        prop_assert!((0.0..=1.0).contains(&d));
        prop_assert!(d >= 0.5 / xs.len() as f64 - 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn bound_sigma_keeps_the_filter_in_the_unit_interval(
        n in 2usize..7,
        j in -2.0f64..2.0,
        h in -1.5f64..1.5,
        u in -0.5f64..0.5,
        ising in any::<bool>(),
    ) {
        let model = if ising {
            SpinModel::transverse_ising(n, j, h).unwrap()
        } else {
            SpinModel::heisenberg(n, j, h).unwrap()
        };
        let energy = u * n as f64;
        let filter = build_filter(&model, energy, Sigma::default()).unwrap();
        let g = filter.g_mpo.to_dense(CAP).unwrap();
        let eig = g.self_adjoint_eigenvalues(Side::Lower).unwrap();
        for x in eig {
            prop_assert!((-1e-12..=1.0 + 1e-12).contains(&x), "{x}");
        }
        let spectrum = diagonalize(&model).unwrap();
        let w = filter_weights(&spectrum, energy, filter.sigma, 3).unwrap();
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(w.iter().all(|&x| x >= 0.0));
    }
}
