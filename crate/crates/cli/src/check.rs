//! Fast invariant suite behind `leakfree check`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use leakfree::magnus::{certify, error_propagator, magnus_terms};
use leakfree::models::{mlz, stirap, transmon};
use leakfree::ops::{c, diag_real, hermitian_defect, max_abs_diff, plus_hc, r, spectral_norm, unitarity_defect};
use leakfree::propagator::{interaction_picture, propagate};
use leakfree::{HilbertPartition, LeakageProblem, Mat, TimeDepOperator};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

impl std::fmt::Display for CheckResult {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[{}] {}: {}", if self.pass { "PASS" } else { "FAIL" }, self.name, self.detail)
    }
}

type Outcome = leakfree::Result<(bool, String)>;

fn hermitian_hamiltonians(rng: &mut ChaCha8Rng) -> Outcome {
    let ops: Vec<(&str, TimeDepOperator)> = vec![
        ("stirap_const", stirap::build(&stirap::StirapParams::vitanov(1.0, 0.7))?.hamiltonian()),
        ("stirap_gauss", stirap::build(&stirap::StirapParams::gaussian(1.0, 0.7))?.hamiltonian()),
        ("transmon", transmon::build_transmon(&transmon::TransmonParams::new(0.1, 1.0))?.hamiltonian()),
        ("mlz", mlz::lab_hamiltonian(&mlz::MlzParams::equal(0.3, 0.1))),
    ];
    let mut worst: f64 = 0.0;
    for (_, h) in &ops {
        let (a, b) = h.window();
        for _ in 0..16 {
            worst = worst.max(hermitian_defect(&h.eval(rng.gen_range(a..b))));
        }
    }
    Ok((worst < 1e-12, format!("max defect {worst:.1e} over {} models", ops.len())))
}

fn satd_exactness(tol: f64) -> Outcome {
    let e = stirap::protocol_infidelity(&stirap::StirapParams::vitanov(1.0, 1.0), stirap::Protocol::Satd, tol)?;
    Ok((e <= 1e-8, format!("constant-gap STIRAP infidelity {e:.2e} at nu = 1")))
}

fn landau_zener(tol: f64) -> Outcome {
    let p = mlz::lz_transfer_probability(1.0, mlz::DEFAULT_WINDOW, tol)?;
    let want = mlz::lz_asymptotic(1.0);
    Ok(((p - want).abs() <= 2e-3, format!("transfer {p:.5} vs asymptotic {want:.5}")))
}

fn superadiabatic_frame(rng: &mut ChaCha8Rng) -> Outcome {
    let p = mlz::MlzParams::equal(0.3, 0.1);
    let (s, _) = mlz::superadiabatic_frame(&p)?;
    let mut frame: f64 = 0.0;
    let mut closed: f64 = 0.0;
    for _ in 0..8 {
        let tau = rng.gen_range(p.window.0..p.window.1);
        frame = frame.max(unitarity_defect(&s.eval(tau)));
        let direct = mlz::v_sad_elements(&p, tau)?.into_matrix();
        let printed = mlz::appendix_v_sad(&p, tau)?.into_matrix();
        closed = closed.max(max_abs_diff(&direct, &printed));
    }
    Ok((frame < 1e-12 && closed < 1e-9, format!("unitarity defect {frame:.1e}, closed-form deviation {closed:.1e}")))
}

fn transmon_correction(tol: f64) -> Outcome {
    let p = transmon::TransmonParams::new(0.1, 1.0);
    let e0 = transmon::protocol_infidelity(&p, transmon::Protocol::Uncorrected, tol)?;
    let e1 = transmon::protocol_infidelity(&p, transmon::Protocol::Ideal, tol)?;
    Ok((e1 < 1e-2 * e0, format!("Hadamard infidelity {e0:.2e} -> {e1:.2e} at kappa0 = 0.1")))
}

fn random_block(rng: &mut ChaCha8Rng, n: usize, q: usize, cross: bool) -> Mat {
    let mut m = Mat::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            if ((i < q) != (j < q)) == cross {
                m[(i, j)] = c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            }
        }
    }
    plus_hc(&m)
}

fn magnus_truncation(rng: &mut ChaCha8Rng, tol: f64) -> Outcome {
    let (n, q, tf) = (3, 1, 2.0);
    let window = (0.0, tf);
    let diag: Vec<f64> = (0..n).map(|k| rng.gen_range(-1.0..1.0) + if k >= q { 1.5 } else { 0.0 }).collect();
    let h0 = TimeDepOperator::constant(random_block(rng, n, q, false) + diag_real(&diag), window);
    let a = random_block(rng, n, q, true);
    let v = TimeDepOperator::new(n, window, move |t| &a * r((1.3 * t).cos()));
    let u0 = propagate(&h0, window, tol)?;
    let cert = certify(&interaction_picture(&v, &u0)?, window)?.value;
    let v = v.scale(0.5 / cert);
    let v_int = interaction_picture(&v, &u0)?;
    let terms = magnus_terms(&v_int, window, 3, tol)?;
    let exact = LeakageProblem::new(HilbertPartition::numbered(n, q)?, h0, v, 1.0, window, Mat::identity(q, q))?.error_propagator(None, tol)?;
    let err = spectral_norm(&(error_propagator(&terms, tf) - exact));
    Ok((err < 1e-2, format!("order-3 propagator error {err:.2e} at certificate 0.5")))
}

/// Run every check; `seed` fixes the random probe times and problems.
pub fn run_checks(seed: u64, tol: f64) -> Vec<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    let mut push = |name: &'static str, outcome: Outcome| {
        let (pass, detail) = outcome.unwrap_or_else(|e| (false, format!("error: {e}")));
        out.push(CheckResult { name, pass, detail });
    };
    push("hermitian Hamiltonians", hermitian_hamiltonians(&mut rng));
    push("SATD exactness", satd_exactness(tol));
    push("two-level Landau-Zener", landau_zener(tol));
    push("superadiabatic frame", superadiabatic_frame(&mut rng));
    push("transmon ideal correction", transmon_correction(tol));
    push("Magnus truncation", magnus_truncation(&mut rng, tol));
    out
}
