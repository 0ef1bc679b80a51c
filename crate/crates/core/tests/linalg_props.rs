use matcon::linalg::{dilation, is_psd, loewner_leq, matrix_power, spectral_norm};
use matcon::rng::{gaussian_complex_matrix, random_hermitian, random_psd, random_unit_vector, CounterRng, RngSeed};
use proptest::prelude::*;

fn rng(seed: u64) -> CounterRng {
    CounterRng::new(RngSeed(seed), 0, 0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rayleigh_quotient_lies_in_spectrum(seed in any::<u64>(), d in 1usize..8) {
        let mut r = rng(seed);
        let h = random_hermitian(&mut r, d);
        let u = random_unit_vector(&mut r, d);
        let q = h.quadratic_form(&u);
        let tol = 1e-10 * h.spectral_norm().max(1.0);
        prop_assert!(h.lambda_min() - tol <= q && q <= h.lambda_max() + tol);
    }

    #[test]
    fn norm_of_power_is_power_of_norm(seed in any::<u64>(), d in 1usize..7, p in 1u32..=4) {
        let h = random_hermitian(&mut rng(seed), d);
        let lhs = matrix_power(&h, p).spectral_norm();
        let rhs = h.spectral_norm().powi(p as i32);
        prop_assert!((lhs - rhs).abs() <= 1e-9 * rhs.max(1.0));
    }

    #[test]
    fn psd_norm_bounded_by_trace(seed in any::<u64>(), d in 1usize..8) {
        let a = random_psd(&mut rng(seed), d);
        prop_assert!(is_psd(&a, 1e-10).unwrap());
        prop_assert!(a.spectral_norm() <= a.trace() * (1.0 + 1e-12) + 1e-12);
    }

    #[test]
    fn adding_psd_is_monotone(seed in any::<u64>(), d in 1usize..7) {
        let mut r = rng(seed);
        let a = random_hermitian(&mut r, d);
        let p = random_psd(&mut r, d);
        let b = a.add(&p).unwrap();
        prop_assert!(loewner_leq(&a, &b, 1e-9).unwrap());
        prop_assert!(a.lambda_max() <= b.lambda_max() + 1e-9 * b.spectral_norm().max(1.0));
    }

    #[test]
    fn eigendecomposition_reconstructs(seed in any::<u64>(), d in 1usize..9) {
        let h = random_hermitian(&mut rng(seed), d);
        let e = h.eig().unwrap();
        let back = e.reconstruct();
        prop_assert!(back.as_rect().max_abs_diff(h.as_rect()) <= 1e-10 * h.frobenius_norm().max(1.0));
        prop_assert!(e.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn rectangular_norm_matches_dilation_and_gram(seed in any::<u64>(), r in 1usize..6, c in 1usize..6) {
        let b = gaussian_complex_matrix(&mut rng(seed), r, c);
        let n = spectral_norm(&b);
        let tol = 1e-9 * n.max(1.0);
        prop_assert!((dilation(&b).spectral_norm() - n).abs() <= tol);
        prop_assert!((b.gram_left().spectral_norm() - n * n).abs() <= tol * n.max(1.0));
        prop_assert!((b.gram_right().spectral_norm() - n * n).abs() <= tol * n.max(1.0));
    }
}
