use leakfree::fidelity::{avg_fidelity_full, scaling_exponent};
use leakfree::magnus::magnus_terms;
use leakfree::ops::{c, expm, frobenius_norm, logm_unitary, max_abs, max_abs_diff, r, spectral_norm, unitarity_defect, I};
use leakfree::propagator::{interaction_picture, propagate, propagate_final};
use leakfree::sweep::{first_crossing, linear_grid, log_grid};
use leakfree::{Mat, TimeDepOperator};
use proptest::prelude::*;

fn hermitian(n: usize, xs: &[f64]) -> Mat {
    let mut m = Mat::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = r(xs[i * n + i]);
        for j in i + 1..n {
            let z = c(xs[i * n + j], xs[j * n + i]);
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
        }
    }
    m
}

fn hermitian_strategy() -> impl Strategy<Value = Mat> {
    (2usize..=4).prop_flat_map(|n| prop::collection::vec(-1.0f64..1.0, n * n).prop_map(move |xs| hermitian(n, &xs)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn exponential_of_hermitian_generator_is_unitary_and_invertible(h in hermitian_strategy()) {
        let h = if spectral_norm(&h) > 2.0 { &h * r(2.0 / spectral_norm(&h)) } else { h };
        let u = expm(&(&h * (-I)));
        prop_assert!(unitarity_defect(&u) < 1e-12);
        prop_assert!(max_abs_diff(&logm_unitary(&u), &(&h * (-I))) < 1e-10);
    }

    #[test]
    fn norms_are_ordered(h in hermitian_strategy()) {
        let s = spectral_norm(&h);
        prop_assert!(max_abs(&h) <= s + 1e-12);
        prop_assert!(s <= frobenius_norm(&h) + 1e-12);
    }

    #[test]
    fn average_fidelity_lies_in_the_unit_interval(h in hermitian_strategy(), phase in -3.0f64..3.0) {
        let u = expm(&(&h * (-I)));
        let f = avg_fidelity_full(&u);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&f));
        let shifted = &u * c(phase.cos(), phase.sin());
        prop_assert!((avg_fidelity_full(&shifted) - f).abs() < 1e-12);
        prop_assert!((avg_fidelity_full(&Mat::identity(u.nrows(), u.nrows())) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn power_laws_are_recovered_exactly(a in 1e-6f64..1e3, p in -1.0f64..8.0) {
        let samples: Vec<(f64, f64)> = [1.0, 0.5, 0.25, 0.125].iter().map(|&s| (s, a * f64::powf(s, p))).collect();
        let fit = scaling_exponent(&samples).unwrap();
        prop_assert!((fit.exponent - p).abs() < 1e-9);
        prop_assert!(fit.r_squared > 1.0 - 1e-9);
    }

    #[test]
    fn grids_are_monotone_with_exact_ends(lo in 1e-3f64..1.0, span in 1.01f64..100.0, n in 2usize..60) {
        let hi = lo * span;
        for g in [log_grid(lo, hi, n).unwrap(), linear_grid(lo, hi, n)] {
            prop_assert_eq!(g.len(), n);
            prop_assert!(g.windows(2).all(|w| w[1] > w[0]));
            prop_assert!((g[0] - lo).abs() <= 1e-12 * lo);
            prop_assert_eq!(g[n - 1], hi);
        }
    }

    #[test]
    fn first_crossing_is_bracketed(p in 0.5f64..6.0, a in 1e-6f64..1e-4) {
        let xs = log_grid(0.1, 10.0, 25).unwrap();
        let ys: Vec<f64> = xs.iter().map(|x| a * x.powf(p)).collect();
        let th = a * 3f64.powf(p);
        let x = first_crossing(&xs, &ys, th).unwrap();
        prop_assert!((x - 3.0).abs() < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn constant_hamiltonian_propagator_matches_exponential(h in hermitian_strategy(), t in 0.1f64..3.0) {
        let window = (0.0, t);
        let u = propagate_final(&TimeDepOperator::constant(h.clone(), window), window, 1e-11).unwrap();
        prop_assert!(max_abs_diff(&u, &expm(&(&h * c(0.0, -t)))) < 1e-8);
    }

    #[test]
    fn commuting_perturbation_has_only_a_first_magnus_term(h in hermitian_strategy(), a in -1.0f64..1.0, b in -1.0f64..1.0, w in 0.5f64..4.0) {
        let (n, tf) = (h.nrows(), 2.0);
        let window = (0.0, tf);
        let u0 = propagate(&TimeDepOperator::zero(n, window), window, 1e-12).unwrap();
        let hv = h.clone();
        let v = TimeDepOperator::new(n, window, move |t| &hv * r(a + b * (w * t).cos()));
        let terms = magnus_terms(&interaction_picture(&v, &u0).unwrap(), window, 3, 1e-12).unwrap();
        let integral = a * tf + b * (w * tf).sin() / w;
        prop_assert!(max_abs_diff(&terms.omega_final(1), &(&h * (-I * integral))) < 1e-9);
        prop_assert!(max_abs(&terms.omega_final(2)) < 1e-9);
        prop_assert!(max_abs(&terms.omega_final(3)) < 1e-9);
    }
}
