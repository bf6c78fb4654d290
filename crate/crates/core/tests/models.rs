use leakfree::corrections::w1_from_generator;
use leakfree::magnus::magnus_terms;
use leakfree::models::{mlz, stirap, transmon};
use leakfree::ops::{max_abs, max_abs_diff, r, I};
use leakfree::partition::q_apply;
use leakfree::propagator::{interaction_picture, propagate, propagate_state};
use leakfree::timedep::uniform_grid;

const TOL: f64 = 1e-11;

#[test]
fn naive_drag_correction_diverges_before_the_gaussian_window() {
    let p = stirap::StirapParams::gaussian(1.0, 0.5);
    let amps: Vec<f64> = (0..=8).map(|k| stirap::naive_drag_amplitude(&p, -(k as f64) / p.nu)).collect();
    let sup = amps.iter().copied().fold(0.0, f64::max);
    assert!(sup > 1e3 * p.g0, "{amps:?}");
    assert!(amps.windows(2).skip(1).all(|w| w[1] > w[0]), "{amps:?}");
}

#[test]
fn constant_gap_first_order_correction_scales_as_nu_squared() {
    let peak = |nu: f64| {
        let p = stirap::StirapParams::vitanov(1.0, nu);
        let w = stirap::w1_closed_form(&p);
        let (a, b) = p.window();
        uniform_grid(a, b, 401).into_iter().map(|t| max_abs(&w.eval(t))).fold(0.0, f64::max)
    };
    let (a, b) = (peak(0.2), peak(0.1));
    assert!((a / b - 4.0).abs() < 1e-6, "{a} {b}");
}

#[test]
fn satd_makes_the_two_level_sweep_exact() {
    let eta = 0.5;
    let p = mlz::MlzParams::qubit_only(eta);
    let h = mlz::lab_hamiltonian(&p).add(&mlz::satd_operator(&p));
    let g0 = mlz::qubit_ground_state(eta, p.window.0);
    let psi = propagate_state(&h, p.window, &[r(g0[0]), r(g0[1]), r(0.0), r(0.0)], TOL).unwrap();
    let g1 = mlz::qubit_ground_state(eta, p.window.1);
    let infidelity = 1.0 - (psi[0] * g1[0] + psi[1] * g1[1]).norm_sqr();
    assert!(infidelity <= 1e-8, "{infidelity:e}");
}

#[test]
fn uncoupled_leakage_levels_leave_the_qubit_alone() {
    let mut p = mlz::MlzParams::equal(0.7, 0.1);
    p.eta12 = 0.0;
    p.eta03 = 0.0;
    let h = mlz::lab_hamiltonian(&p);
    for t in [-12.0, -0.4, 0.0, 3.3] {
        let m = h.eval(t);
        for (i, j) in [(0, 2), (0, 3), (1, 2), (1, 3)] {
            assert_eq!(m[(i, j)], r(0.0));
        }
    }
    let mixed = mlz::transfer_infidelity(&p, None, TOL).unwrap();
    let bare = mlz::transfer_infidelity(&mlz::MlzParams::qubit_only(0.7), None, TOL).unwrap();
    assert!((mixed - bare).abs() < 1e-9, "{mixed} {bare}");
}

#[test]
fn ground_state_stays_corrupted_at_the_window_end() {
    let w = mlz::ground_state_weight(&mlz::MlzParams::equal(1.0, 0.1), 20.0);
    assert!(w <= 0.999, "{w}");
    let bare = mlz::ground_state_weight(&mlz::MlzParams::qubit_only(1.0), 20.0);
    assert!(bare > 0.999, "{bare}");
}

#[test]
fn generating_correction_fixes_the_first_magnus_term() {
    let p = mlz::MlzParams::equal(0.3, 0.1);
    let problem = mlz::sad_problem(&p).unwrap();
    let z = mlz::v_part(&p).unwrap();
    let w1 = w1_from_generator(&problem, &z);
    let u0 = propagate(&problem.h0, problem.window, 1e-12).unwrap();
    let v_int = interaction_picture(&problem.perturbation().add(&w1), &u0).unwrap();
    let terms = magnus_terms(&v_int, problem.window, 1, 1e-12).unwrap();
    let zi = z.eval(problem.window.0);
    for t in [-10.0, -1.0, 0.0, 3.0, 20.0] {
        let want = (u0.to_interaction(&z.eval(t), t) - &zi) * (-I);
        let got = q_apply(&terms.omega(1, t), problem.n_comp());
        assert!(max_abs_diff(&got, &want) < 1e-7, "t = {t}");
    }
}

#[test]
fn first_order_mlz_correction_is_linear_in_the_spurious_couplings() {
    let peak = |s: f64| {
        let p = mlz::MlzParams::equal(0.3, 0.1).with_spurious_scale(s);
        let problem = mlz::sad_problem(&p).unwrap();
        let w1 = w1_from_generator(&problem, &mlz::v_part(&p).unwrap());
        uniform_grid(p.window.0, p.window.1, 801).into_iter().map(|t| max_abs(&w1.eval(t))).fold(0.0, f64::max)
    };
    let (a, b, c) = (peak(1.0), peak(0.5), peak(0.25));
    assert!((a / b - 2.0).abs() < 1e-6 && (b / c - 2.0).abs() < 1e-6, "{a} {b} {c}");
}

#[test]
fn mlz_controls_are_smooth() {
    let p = mlz::MlzParams::equal(0.3, 0.1);
    for protocol in [mlz::Protocol::First, mlz::Protocol::Second] {
        let w = mlz::protocol_correction(&p, protocol, 1e-10).unwrap().unwrap();
        let fine = mlz::max_second_difference(&w, mlz::SMOOTHNESS_SAMPLES);
        let coarse = mlz::max_second_difference(&w, (mlz::SMOOTHNESS_SAMPLES + 1) / 2);
        assert!(fine.is_finite() && fine < 1e3, "{protocol:?}: {fine}");
        assert!((fine - coarse).abs() < 0.05 * fine, "{protocol:?}: {fine} vs {coarse}");
    }
}

#[test]
fn transmon_corrections_vanish_without_drive() {
    let p = transmon::TransmonParams::new(0.1, 1.0);
    let cs = transmon::ideal_corrections(&p);
    let total = cs.total(3, p.window());
    for t in [p.window().0, p.window().1] {
        assert!(max_abs(&total.eval(t)) < 1e-12);
    }
}
