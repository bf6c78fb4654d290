//! Acceptance suite: one PASS/FAIL line per criterion. Failing criteria are
//! reported, not asserted; the binary exits non-zero only if a criterion
//! cannot be evaluated at all.

use std::f64::consts::PI;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use leakfree::corrections::{w1_derivative, w1_from_generator, w2_standard, W1Realization, W2Form};
use leakfree::fidelity::{avg_fidelity, scaling_exponent};
use leakfree::magnus::{certify, error_propagator, magnus_terms};
use leakfree::models::{mlz, stirap, transmon};
use leakfree::ops::{c, diag_real, logm_unitary, max_abs, plus_hc, r, spectral_norm, Mat};
use leakfree::partition::{q_apply, HilbertPartition};
use leakfree::problem::LeakageProblem;
use leakfree::propagator::{interaction_picture, propagate};
use leakfree::sweep::{first_crossing, linear_grid, log_grid};
use leakfree::timedep::TimeDepOperator;
use leakfree::Result;

const TOL: f64 = 1e-11;
const SCALES: [f64; 4] = [1.0, 0.5, 0.25, 0.125];
const THRESHOLD: f64 = 1e-3;

// Criterion 1.
const OMEGA1_MIN_EXPONENT: f64 = 2.0 - 0.3;
const OMEGA2_EXPONENT: (f64, f64) = (3.0, 0.3);
// Criterion 2.
const FID1_EXPONENT: (f64, f64) = (4.0, 0.3);
const FID2_EXPONENT: (f64, f64) = (6.0, 0.5);
// Criterion 3.
const STIRAP_RATIO: (f64, f64) = (2.6, 0.10);
// Criterion 4.
const OPTIMAL_RANGE: (f64, f64) = (0.1, 2.2);
const OPTIMAL_BOUNDARY: f64 = 2.21;
const SATD_BOUNDARY: f64 = 2.63;
const BOUNDARY_REL: f64 = 0.05;
// Criterion 5.
const SATD_MAX_ERROR: f64 = 1e-8;
// Criterion 6.
const GAUSS_SPEEDUP: (f64, f64) = (5.0, 0.15);
const GAUSS_FLOOR: (f64, f64) = (3e-5, 3e-4);
// Criterion 7.
const XI_FACTOR: f64 = 1.5;
const XI_MAX_NU: f64 = 0.8;
// Criterion 8.
const TRANSMON_REDUCTION: (f64, f64) = (4.0, 0.20);
const PRINTED_FORMULA_TOL: f64 = 1e-8;
// Criterion 9.
const MLZ_UNCORRECTED_MIN: f64 = 1e-1;
const MLZ_WINDOW_WIDTH: f64 = 0.5;
const APPENDIX_TOL: f64 = 1e-9;
// Criterion 10.
const LZ_TOL: f64 = 2e-3;
// Criterion 11.
const RANDOM_PROBLEMS: usize = 20;
const MAGNUS3_TOL: f64 = 0.1;
const SEED: u64 = 20_161_016;

struct Outcome {
    pass: bool,
    detail: String,
}

fn within(x: f64, (target, rel): (f64, f64)) -> bool {
    (x / target - 1.0).abs() <= rel
}

fn within_abs(x: f64, (target, tol): (f64, f64)) -> bool {
    (x - target).abs() <= tol
}

struct Scaling {
    omega1: f64,
    omega2: f64,
    fid1: f64,
    fid2: f64,
}

fn scaling(base: &LeakageProblem, w1_of: &dyn Fn(&LeakageProblem, f64) -> TimeDepOperator) -> Result<Scaling> {
    let (mut o1, mut o2, mut f1, mut f2) = (vec![], vec![], vec![], vec![]);
    for s in SCALES {
        let p = base.scaled(s);
        let w1 = w1_of(&p, s);
        let w2 = w2_standard(&p, &w1, W2Form::Full, 1e-12)?;
        let q = p.n_comp();
        let u1 = p.error_propagator(Some(&w1), 1e-13)?;
        let u2 = p.error_propagator(Some(&w1.add(&w2)), 1e-13)?;
        o1.push((s, spectral_norm(&q_apply(&logm_unitary(&u1), q))));
        o2.push((s, spectral_norm(&q_apply(&logm_unitary(&u2), q))));
        f1.push((s, 1.0 - avg_fidelity(&u1, &p.partition)));
        f2.push((s, 1.0 - avg_fidelity(&u2, &p.partition)));
    }
    Ok(Scaling {
        omega1: scaling_exponent(&o1)?.exponent,
        omega2: scaling_exponent(&o2)?.exponent,
        fid1: scaling_exponent(&f1)?.exponent,
        fid2: scaling_exponent(&f2)?.exponent,
    })
}

fn model_scalings() -> Result<Vec<(&'static str, Scaling)>> {
    let mut out = vec![];
    let sp = stirap::build(&stirap::StirapParams::vitanov(1.0, 0.5))?;
    let u0 = propagate(&sp.h0, sp.window, 1e-12)?;
    out.push(("stirap", scaling(&sp, &|p, _| w1_derivative(p, &u0, W1Realization::Local).expect("stirap W1"))?));
    let tp = transmon::build_transmon(&transmon::TransmonParams::new(0.1, 1.0))?;
    let u0 = propagate(&tp.h0, tp.window, 1e-12)?;
    out.push(("transmon", scaling(&tp, &|p, _| w1_derivative(p, &u0, W1Realization::Local).expect("transmon W1"))?));
    let mp = mlz::MlzParams::equal(0.3, 0.1);
    let vp = mlz::v_part(&mp)?;
    out.push(("mlz", scaling(&mlz::sad_problem(&mp)?, &|p, s| w1_from_generator(p, &vp.scale(s)))?));
    Ok(out)
}

fn criteria_1_2() -> Result<(Outcome, Outcome)> {
    let rows = model_scalings()?;
    let mut d1 = vec![];
    let mut d2 = vec![];
    let (mut p1, mut p2) = (true, true);
    for (name, s) in &rows {
        p1 &= s.omega1 >= OMEGA1_MIN_EXPONENT && within_abs(s.omega2, OMEGA2_EXPONENT);
        p2 &= within_abs(s.fid1, FID1_EXPONENT) && within_abs(s.fid2, FID2_EXPONENT);
        d1.push(format!("{name}: {:.2}/{:.2}", s.omega1, s.omega2));
        d2.push(format!("{name}: {:.2}/{:.2}", s.fid1, s.fid2));
    }
    Ok((
        Outcome { pass: p1, detail: format!("|QΩ| exponents with W1 / W1+W2 = {} (need ≥ {OMEGA1_MIN_EXPONENT} / 3 ± 0.3)", d1.join(", ")) },
        Outcome { pass: p2, detail: format!("1 − F̄ exponents with W1 / W1+W2 = {} (need 4 ± 0.3 / 6 ± 0.5)", d2.join(", ")) },
    ))
}

fn stirap_curve(protocol: stirap::Protocol, grid: &[f64]) -> Result<Vec<f64>> {
    grid.iter().map(|&nu| stirap::protocol_infidelity(&stirap::StirapParams::vitanov(1.0, nu), protocol, TOL)).collect()
}

fn criterion_3() -> Result<Outcome> {
    let grid = log_grid(0.1, 3.0, 40)?;
    let e0 = stirap_curve(stirap::Protocol::Uncorrected, &grid)?;
    let e2 = stirap_curve(stirap::Protocol::FirstSecond, &grid)?;
    let (x0, x2) = (first_crossing(&grid, &e0, THRESHOLD), first_crossing(&grid, &e2, THRESHOLD));
    Ok(match x0.zip(x2) {
        Some((a, b)) => Outcome { pass: within(b / a, STIRAP_RATIO), detail: format!("crossings ν = {a:.4} → {b:.4}, ratio {:.3} (need 2.6 ± 10%)", b / a) },
        None => Outcome { pass: false, detail: format!("no threshold crossing (uncorrected {x0:?}, corrected {x2:?})") },
    })
}

fn criterion_4() -> Result<Outcome> {
    let grid = linear_grid(OPTIMAL_RANGE.0, OPTIMAL_RANGE.1, 40);
    let worst = stirap_curve(stirap::Protocol::Optimal, &grid)?.into_iter().fold(0.0, f64::max);
    let bo = stirap::amplitude_boundary(1.0, stirap::Protocol::Optimal, (0.5, 5.0))?;
    let bs = stirap::amplitude_boundary(1.0, stirap::Protocol::Satd, (0.5, 5.0))?;
    let pass = worst < THRESHOLD && within(bo, (OPTIMAL_BOUNDARY, BOUNDARY_REL)) && within(bs, (SATD_BOUNDARY, BOUNDARY_REL));
    Ok(Outcome { pass, detail: format!("max ε on [0.1, 2.2] = {worst:.2e}; boundaries optimal {bo:.4}, SATD {bs:.4} (need < 1e-3; 2.21, 2.63 ± 5%)") })
}

fn criterion_5() -> Result<Outcome> {
    let e: Vec<f64> = [1.0, 2.0].iter().map(|&nu| stirap::protocol_infidelity(&stirap::StirapParams::vitanov(1.0, nu), stirap::Protocol::Satd, TOL)).collect::<Result<_>>()?;
    Ok(Outcome { pass: e.iter().all(|&x| x <= SATD_MAX_ERROR), detail: format!("ε(ν=1) = {:.2e}, ε(ν=2) = {:.2e} (need ≤ 1e-8)", e[0], e[1]) })
}

fn gaussian(nu: f64) -> stirap::StirapParams {
    stirap::StirapParams::gaussian(1.0, nu)
}

fn gaussian_curve(order: stirap::GaussianOrder, grid: &[f64]) -> Result<Vec<f64>> {
    grid.iter().map(|&nu| stirap::gaussian_infidelity(&gaussian(nu), order, (0.0, 2.0), TOL)).collect()
}

fn criteria_6_7() -> Result<(Outcome, Outcome)> {
    let grid = linear_grid(0.025, 1.2, 48);
    let e0 = gaussian_curve(stirap::GaussianOrder::Uncorrected, &grid)?;
    let e2 = gaussian_curve(stirap::GaussianOrder::Second, &grid)?;
    let floor_grid = linear_grid(0.025, 0.1, 16);
    let floor = gaussian_curve(stirap::GaussianOrder::Uncorrected, &floor_grid)?.iter().sum::<f64>() / floor_grid.len() as f64;
    let (x0, x2) = (first_crossing(&grid, &e0, THRESHOLD), first_crossing(&grid, &e2, THRESHOLD));
    let speed = x0.zip(x2).map(|(a, b)| b / a);
    let floor_ok = floor >= GAUSS_FLOOR.0 && floor <= GAUSS_FLOOR.1;
    let c6 = Outcome {
        pass: speed.is_some_and(|s| within(s, GAUSS_SPEEDUP)) && floor_ok,
        detail: format!(
            "speedup {} (need 5 ± 15%); floor {floor:.2e} (need [3e-5, 3e-4])",
            speed.map_or("n/a".to_string(), |s| format!("{s:.3}"))
        ),
    };
    let mut worst: f64 = 1.0;
    let mut at = 0.0;
    for (k, &nu) in grid.iter().enumerate() {
        if nu <= XI_MAX_NU {
            let a = stirap::approx_infidelity_gaussian(&gaussian(nu), TOL)?;
            let ratio = (a / e0[k]).max(e0[k] / a);
            if ratio > worst {
                worst = ratio;
                at = nu;
            }
        }
    }
    let c7 = Outcome { pass: worst <= XI_FACTOR, detail: format!("worst |ξ|²/ε factor {worst:.3} at ν = {at:.3} (need ≤ 1.5 for ν ≤ 0.8)") };
    Ok((c6, c7))
}

fn criterion_8() -> Result<Outcome> {
    let grid = log_grid(0.01, 1.0, 25)?;
    let curve = |pr: transmon::Protocol| -> Result<Vec<f64>> {
        grid.iter().map(|&k| transmon::protocol_infidelity(&transmon::TransmonParams::new(k, 1.0), pr, TOL)).collect()
    };
    let e0 = curve(transmon::Protocol::Uncorrected)?;
    let ei = curve(transmon::Protocol::Ideal)?;
    let ec = transmon::protocol_infidelity(&transmon::TransmonParams::new(grid[0], 1.0), transmon::Protocol::Constrained, TOL)?;
    let (x0, xi) = (first_crossing(&grid, &e0, THRESHOLD), first_crossing(&grid, &ei, THRESHOLD));
    let factor = x0.zip(xi).map(|(a, b)| b / a);
    let p = transmon::TransmonParams::new(0.2, 1.0);
    let pipe = transmon::constrained_pipeline(&p, TOL)?;
    let (mut dx, mut dy, mut dd) = (0.0f64, 0.0f64, 0.0f64);
    for t in linear_grid(-1.0, 1.0, 9) {
        let (a, b) = (pipe.quadratures(&p, t), transmon::printed_quadratures(&p, t));
        dx = dx.max((a.kx - b.kx).abs());
        dy = dy.max((a.ky - b.ky).abs());
        dd = dd.max((a.delta - b.delta).abs());
    }
    let formula_ok = dx.max(dy).max(dd) <= PRINTED_FORMULA_TOL;
    let pass = factor.is_some_and(|f| within(f, TRANSMON_REDUCTION)) && ec <= ei[0] && formula_ok;
    Ok(Outcome {
        pass,
        detail: format!(
            "reduction {} (need 4 ± 20%); constrained {ec:.2e} vs ideal {:.2e} at κ₀ = 0.01; printed-formula deviation κx {dx:.1e}, κy {dy:.1e}, δ {dd:.1e} (need ≤ 1e-8)",
            factor.map_or("n/a".to_string(), |f| format!("{f:.3}")),
            ei[0]
        ),
    })
}

/// Widest run of consecutive grid points below the threshold.
fn widest_window(grid: &[f64], ys: &[f64], threshold: f64) -> (f64, f64) {
    let mut best = (0.0, 0.0);
    let mut start: Option<usize> = None;
    for k in 0..=grid.len() {
        let inside = k < grid.len() && ys[k] < threshold;
        match (inside, start) {
            (true, None) => start = Some(k),
            (false, Some(s)) => {
                if grid[k - 1] - grid[s] > best.1 - best.0 {
                    best = (grid[s], grid[k - 1]);
                }
                start = None;
            }
            _ => {}
        }
    }
    best
}

fn criterion_9() -> Result<Outcome> {
    let grid = log_grid(0.1, 1.5, 30)?;
    let mut e0 = vec![];
    let mut e2 = vec![];
    for &eta in &grid {
        let p = mlz::MlzParams::equal(eta, 0.1);
        e0.push(mlz::protocol_infidelity(&p, mlz::Protocol::Uncorrected, 1e-10)?);
        e2.push(mlz::protocol_infidelity(&p, mlz::Protocol::Second, 1e-10)?);
    }
    let min0 = e0.iter().cloned().fold(f64::INFINITY, f64::min);
    let (lo, hi) = widest_window(&grid, &e2, THRESHOLD);
    let p = mlz::MlzParams::equal(1.0, 0.1);
    let mut dev: f64 = 0.0;
    for tau in [-5.0, 0.0, 5.0] {
        let (a, b) = (mlz::v_sad_elements(&p, tau)?, mlz::appendix_v_sad(&p, tau)?);
        dev = dev.max(max_abs(&(a.matrix() - b.matrix())));
    }
    let pass = min0 > MLZ_UNCORRECTED_MIN && hi - lo >= MLZ_WINDOW_WIDTH && dev <= APPENDIX_TOL;
    Ok(Outcome {
        pass,
        detail: format!(
            "min uncorrected ε {min0:.3} (need > 0.1); corrected ε < 1e-3 on η ∈ [{lo:.3}, {hi:.3}], width {:.3} (need ≥ 0.5); closed forms vs S†VS {dev:.1e} (need ≤ 1e-9)",
            hi - lo
        ),
    })
}

fn criterion_10() -> Result<Outcome> {
    let p = mlz::lz_transfer_probability(1.0, (-20.0, 20.0), TOL)?;
    let want = 1.0 - (-PI).exp();
    Ok(Outcome { pass: (p - want).abs() <= LZ_TOL, detail: format!("transfer {p:.5} vs 1 − e^−π = {want:.5} (need within 2e-3)") })
}

fn random_hermitian(rng: &mut ChaCha8Rng, n: usize, q: usize, cross_only: bool) -> Mat {
    let mut m = Mat::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let cross = (i < q) != (j < q);
            if cross_only && !cross || !cross_only && cross {
                continue;
            }
            if i == j {
                m[(i, i)] = r(rng.gen_range(-2.0..2.0));
            } else {
                m[(i, j)] = c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            }
        }
    }
    plus_hc(&m) - Mat::from_diagonal(&m.diagonal())
}

fn criterion_11() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut worst: f64 = 0.0;
    let mut max_cert: f64 = 0.0;
    for _ in 0..RANDOM_PROBLEMS {
        let n = rng.gen_range(2..=4);
        let q = rng.gen_range(1..n);
        let tf = rng.gen_range(1.0..3.0);
        let h0 = random_hermitian(&mut rng, n, q, false) + diag_real(&(0..n).map(|k| if k >= q { 1.5 } else { 0.0 }).collect::<Vec<_>>());
        let (a, b) = (random_hermitian(&mut rng, n, q, true), random_hermitian(&mut rng, n, q, true));
        let w = rng.gen_range(0.5..4.0);
        let target = rng.gen_range(0.2..3.0);
        let window = (0.0, tf);
        let v_unit = TimeDepOperator::new(n, window, move |t| &a * r((w * t).cos()) + &b * r(t / tf));
        let h0op = TimeDepOperator::constant(h0.clone(), window);
        let u0 = propagate(&h0op, window, 1e-12)?;
        let cert1 = certify(&interaction_picture(&v_unit, &u0)?, window)?.value;
        let v = v_unit.scale(target / cert1);
        let v_int = interaction_picture(&v, &u0)?;
        let cert = certify(&v_int, window)?;
        if !cert.converges {
            continue;
        }
        max_cert = max_cert.max(cert.value);
        let terms = magnus_terms(&v_int, window, 3, 1e-12)?;
        let problem = LeakageProblem::new(HilbertPartition::numbered(n, q)?, h0op, v, 1.0, window, Mat::identity(q, q))?;
        let exact = problem.error_propagator(None, 1e-12)?;
        worst = worst.max(spectral_norm(&(error_propagator(&terms, tf) - exact)));
    }
    Ok(Outcome { pass: worst < MAGNUS3_TOL, detail: format!("worst ‖U_Magnus3 − U‖₂ = {worst:.3e} over {RANDOM_PROBLEMS} problems, certificates up to {max_cert:.2} (need < 0.1)") })
}

fn report(id: usize, name: &str, outcome: Result<Outcome>, started: Instant, failed_eval: &mut bool) {
    let secs = started.elapsed().as_secs_f64();
    match outcome {
        Ok(o) => println!("[{}] C{id:<2} {name}: {} ({secs:.0}s)", if o.pass { "PASS" } else { "FAIL" }, o.detail),
        Err(e) => {
            *failed_eval = true;
            println!("[FAIL] C{id:<2} {name}: evaluation error: {e}");
        }
    }
}

fn main() {
    let mut broken = false;
    println!("acceptance suite");
    let t = Instant::now();
    match criteria_1_2() {
        Ok((a, b)) => {
            report(1, "Magnus cancellation order", Ok(a), t, &mut broken);
            report(2, "fidelity scaling", Ok(b), t, &mut broken);
        }
        Err(e) => {
            report(1, "Magnus cancellation order", Err(e.clone()), t, &mut broken);
            report(2, "fidelity scaling", Err(e), t, &mut broken);
        }
    }
    let t = Instant::now();
    report(3, "STIRAP constant-gap speedup", criterion_3(), t, &mut broken);
    let t = Instant::now();
    report(4, "optimal-γ control", criterion_4(), t, &mut broken);
    let t = Instant::now();
    report(5, "SATD exactness", criterion_5(), t, &mut broken);
    let t = Instant::now();
    match criteria_6_7() {
        Ok((a, b)) => {
            report(6, "Gaussian STIRAP", Ok(a), t, &mut broken);
            report(7, "first-order error formula", Ok(b), t, &mut broken);
        }
        Err(e) => {
            report(6, "Gaussian STIRAP", Err(e.clone()), t, &mut broken);
            report(7, "first-order error formula", Err(e), t, &mut broken);
        }
    }
    let t = Instant::now();
    report(8, "transmon Hadamard", criterion_8(), t, &mut broken);
    let t = Instant::now();
    report(9, "multiple-crossings Landau-Zener", criterion_9(), t, &mut broken);
    let t = Instant::now();
    report(10, "two-level Landau-Zener", criterion_10(), t, &mut broken);
    let t = Instant::now();
    report(11, "convergence certificate", criterion_11(), t, &mut broken);
    if broken {
        std::process::exit(1);
    }
}
