//! Weakly anharmonic three-level qubit driven on its 0↔1 transition, with
//! leakage to level 2 through the λ-scaled 1↔2 matrix element.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use statrs::function::erf::erf;

use crate::corrections::{
    iterative_ibp, phase_error_diagonal, split_controls, truncate_to_pattern, w1_derivative, w2_standard, CorrectionSet, FrameTag, IbpResult, Mask,
    Strategy, W1Realization, W2Form,
};
use crate::error::{Error, Result};
use crate::fidelity::gate_fidelity;
use crate::jet;
use crate::ops::{c, from_rows, ket_bra, plus_hc, r, zeros, Mat, OperatorMatrix, Role, C64, I};
use crate::partition::HilbertPartition;
use crate::problem::LeakageProblem;
use crate::propagator::{propagate_final, PropagationResult};
use crate::timedep::TimeDepOperator;

/// Detuning pattern: δ-dependent part of H₀ for a unit detuning, up to a
/// factor −1/2; the implementable diagonal direction.
pub const DETUNING_PATTERN: [f64; 3] = [1.0, -1.0, -3.0];
/// Window half-width in units of 1/κ₀.
pub const DEFAULT_WINDOW_UNITS: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransmonParams {
    pub kappa0: f64,
    /// Gaussian width; `None` selects √π/(4κ₀).
    pub t0: Option<f64>,
    pub anharmonicity: f64,
    pub lambda_rel: f64,
    /// Constant drive detuning of the uncorrected pulse.
    pub detuning: f64,
    /// Protocol window; `None` selects ±3/κ₀.
    pub window: Option<(f64, f64)>,
}

impl TransmonParams {
    pub fn new(kappa0: f64, anharmonicity: f64) -> Self {
        Self { kappa0, t0: None, anharmonicity, lambda_rel: 2f64.sqrt(), detuning: 0.0, window: None }
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda_rel = lambda;
        self
    }

    pub fn with_kappa0(mut self, kappa0: f64) -> Self {
        self.kappa0 = kappa0;
        self
    }

    pub fn with_detuning(mut self, detuning: f64) -> Self {
        self.detuning = detuning;
        self
    }

    pub fn width(&self) -> f64 {
        self.t0.unwrap_or(PI.sqrt() / (4.0 * self.kappa0))
    }

    pub fn window(&self) -> (f64, f64) {
        self.window.unwrap_or((-DEFAULT_WINDOW_UNITS / self.kappa0, DEFAULT_WINDOW_UNITS / self.kappa0))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa0 > 0.0 && self.kappa0.is_finite()) {
            return Err(Error::Param(format!("kappa0 must be positive, got {}", self.kappa0)));
        }
        if !(self.anharmonicity != 0.0 && self.anharmonicity.is_finite()) {
            return Err(Error::Param("anharmonicity must be non-zero".into()));
        }
        if !(self.lambda_rel >= 0.0 && self.lambda_rel.is_finite()) {
            return Err(Error::Param(format!("lambda must be non-negative, got {}", self.lambda_rel)));
        }
        if !(self.width() > 0.0) || !self.detuning.is_finite() {
            return Err(Error::Param("invalid pulse width or detuning".into()));
        }
        let (a, b) = self.window();
        if !(b > a) {
            return Err(Error::Param(format!("empty window [{a}, {b}]")));
        }
        for t in [a, b] {
            if self.kappa(t, 0)[0] > 1e-3 * self.kappa0 {
                return Err(Error::Param(format!("pulse does not vanish at window edge t = {t}")));
            }
        }
        Ok(())
    }

    /// κ(t) = κ₀ exp(−t²/t₀²) and its derivatives.
    pub fn kappa(&self, t: f64, n: usize) -> Vec<f64> {
        let w = self.width();
        jet::affine(&jet::gaussian(t / w, n), 1.0 / w).into_iter().map(|v| self.kappa0 * v).collect()
    }

    /// φ(t) = ∫_{t_i}^t κ.
    pub fn phi(&self, t: f64) -> f64 {
        let w = self.width();
        PI.sqrt() * self.kappa0 * w * (erf(t / w) - erf(self.window().0 / w)) / 2.0
    }
}

pub fn partition() -> HilbertPartition {
    HilbertPartition::new(3, 2, vec!["0".into(), "1".into(), "2".into()]).expect("valid partition")
}

/// (|0⟩⟨0| − i|0⟩⟨1| − i|1⟩⟨0| + |1⟩⟨1|)/√2.
pub fn hadamard_target() -> Mat {
    let h = FRAC_1_SQRT_2;
    from_rows(&[&[r(h), c(0.0, -h)], &[c(0.0, -h), r(h)]])
}

fn detuning_unit() -> Mat {
    crate::ops::diag_real(&[-0.5, 0.5, 1.5])
}

/// Diagonal operator c(t)·diag(1, −1, −3) for a detuning-like correction.
pub fn pattern_unit() -> Mat {
    crate::ops::diag_real(&DETUNING_PATTERN)
}

pub fn build_transmon(params: &TransmonParams) -> Result<LeakageProblem> {
    params.validate()?;
    let p = *params;
    let window = params.window();
    let mut fixed = detuning_unit() * r(params.detuning);
    fixed[(2, 2)] += r(params.anharmonicity);
    let drive = plus_hc(&ket_bra(3, 0, 1));
    let h0 = TimeDepOperator::from_jet(3, window, move |t, n| {
        let k = p.kappa(t, n);
        (0..=n).map(|j| &drive * r(k[j]) + if j == 0 { fixed.clone() } else { zeros(3) }).collect()
    })
    .with_role(Role::Hamiltonian);
    let v = TimeDepOperator::scalar_times(plus_hc(&ket_bra(3, 1, 2)), window, move |t, n| p.kappa(t, n)).with_role(Role::Hamiltonian);
    LeakageProblem::new(partition(), h0, v, params.lambda_rel, window, hadamard_target())
}

/// Resonant U₀(t) in closed form.
pub fn u0_closed_form(params: &TransmonParams, t: f64) -> Result<OperatorMatrix> {
    if params.detuning != 0.0 {
        return Err(Error::Precondition("closed-form U0 needs zero detuning".into()));
    }
    Ok(OperatorMatrix::generic(u0_matrix(params, t)))
}

fn u0_matrix(params: &TransmonParams, t: f64) -> Mat {
    let (s, co) = params.phi(t).sin_cos();
    let mut u = zeros(3);
    u[(0, 0)] = r(co);
    u[(1, 1)] = r(co);
    u[(0, 1)] = c(0.0, -s);
    u[(1, 0)] = c(0.0, -s);
    u[(2, 2)] = C64::from_polar(1.0, -params.anharmonicity * (t - params.window().0));
    u
}

/// U₀ as a propagation result, for use by the corrections pipeline.
pub fn u0_result(params: &TransmonParams) -> Result<PropagationResult> {
    if params.detuning != 0.0 {
        return Err(Error::Precondition("closed-form U0 needs zero detuning".into()));
    }
    let p = *params;
    Ok(PropagationResult::analytic(3, params.window(), move |t| u0_matrix(&p, t)))
}

/// Jets of κ, κ² and κ³ at t.
fn kappa_powers(p: &TransmonParams, t: f64, n: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let k = p.kappa(t, n);
    let k2 = jet::mul_scalar(&k, &k);
    let k3 = jet::mul_scalar(&k2, &k);
    (k, k2, k3)
}

/// iλκ̇/Δ|1⟩⟨2| − λκ²/Δ|0⟩⟨2| + H.c.
pub fn ideal_w1(params: &TransmonParams) -> TimeDepOperator {
    let p = *params;
    let (e12, e02) = (ket_bra(3, 1, 2), ket_bra(3, 0, 2));
    TimeDepOperator::from_jet(3, params.window(), move |t, n| {
        let (k, k2, _) = kappa_powers(&p, t, n + 1);
        let (l, d) = (p.lambda_rel, p.anharmonicity);
        (0..=n).map(|j| plus_hc(&(&e12 * c(0.0, l * k[j + 1] / d) - &e02 * r(l * k2[j] / d)))).collect()
    })
    .with_role(Role::Hamiltonian)
}

/// λ²κ²/Δ(|1⟩⟨1| − |2⟩⟨2|) − (λ²κ³/(2Δ²)|0⟩⟨1| + H.c.).
pub fn ideal_w2(params: &TransmonParams) -> TimeDepOperator {
    let p = *params;
    let diag = crate::ops::diag_real(&[0.0, 1.0, -1.0]);
    let x01 = plus_hc(&ket_bra(3, 0, 1));
    TimeDepOperator::from_jet(3, params.window(), move |t, n| {
        let (_, k2, k3) = kappa_powers(&p, t, n);
        let (l2, d) = (p.lambda_rel * p.lambda_rel, p.anharmonicity);
        (0..=n).map(|j| &diag * r(l2 * k2[j] / d) - &x01 * r(l2 * k3[j] / (2.0 * d * d))).collect()
    })
    .with_role(Role::Hamiltonian)
}

pub fn ideal_corrections(params: &TransmonParams) -> CorrectionSet {
    CorrectionSet::new(FrameTag::Lab).with(ideal_w1(params), Strategy::Derivative, 1).with(ideal_w2(params), Strategy::SecondStandard, 2)
}

/// Corrected pulse: envelope κ̃ = κ̃ₓ + iκ̃_y and detuning δ(t) given as the
/// coefficient of diag(1, −1, −3).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadratures {
    pub kx: f64,
    pub ky: f64,
    pub delta: f64,
}

/// Closed-form corrected pulse of the constrained correction.
pub fn printed_quadratures(params: &TransmonParams, t: f64) -> Quadratures {
    let (k, _, k3) = kappa_powers(params, t, 1);
    let (l2, d) = (params.lambda_rel * params.lambda_rel, params.anharmonicity);
    let k0 = k[0];
    Quadratures {
        kx: k0 - k3[0] / (d * d),
        ky: k[1] / d + 2.0 / 3.0 * k3[1] / d.powi(3),
        delta: k0 * k0 / d * (2.0 - 0.5 * l2) + k0.powi(4) / d.powi(3) * (1.0 / 3.0 - l2) - 2.0 / 3.0 * k0.powi(6) / d.powi(5),
    }
}

/// 2κ²/Δ(1 + (2/3)κ²/Δ²) as the detuning-pattern coefficient.
pub fn constrained_w1_diag_coefficient(params: &TransmonParams, t: f64) -> f64 {
    let k2 = params.kappa(t, 0)[0].powi(2);
    let d = params.anharmonicity;
    2.0 * k2 / d * (1.0 + 2.0 / 3.0 * k2 / (d * d))
}

/// −½κ²/Δ[λ² + κ²/Δ²(2 − λ²) + (4/3)κ⁴/Δ⁴] as the detuning-pattern coefficient.
pub fn constrained_w2_coefficient(params: &TransmonParams, t: f64) -> f64 {
    let k2 = params.kappa(t, 0)[0].powi(2);
    let (l2, d) = (params.lambda_rel * params.lambda_rel, params.anharmonicity);
    let x = k2 / (d * d);
    -0.5 * k2 / d * (l2 + x * (2.0 - l2) + 4.0 / 3.0 * x * x)
}

/// [i(κ̇/Δ + (2/3)∂ₜκ³/Δ³) − κ³/Δ²](|0⟩⟨1| + λ|1⟩⟨2|) + H.c.
pub fn constrained_w1_ctrl(params: &TransmonParams) -> TimeDepOperator {
    let p = *params;
    let line = ket_bra(3, 0, 1) + ket_bra(3, 1, 2) * r(params.lambda_rel);
    TimeDepOperator::from_jet(3, params.window(), move |t, n| {
        let (k, _, k3) = kappa_powers(&p, t, n + 1);
        let d = p.anharmonicity;
        (0..=n)
            .map(|j| {
                let a = c(-k3[j] / (d * d), k[j + 1] / d + 2.0 / 3.0 * k3[j + 1] / d.powi(3));
                plus_hc(&(&line * a))
            })
            .collect()
    })
    .with_role(Role::Hamiltonian)
}

fn pattern_operator(params: &TransmonParams, coeff: fn(&TransmonParams, f64) -> f64) -> TimeDepOperator {
    let p = *params;
    TimeDepOperator::new(3, params.window(), move |t| pattern_unit() * r(coeff(&p, t))).with_role(Role::Hamiltonian)
}

/// W₁^eff = W₁^diag + W₁^{ctrl,C} and W₂^eff as closed forms.
pub fn constrained_corrections(params: &TransmonParams) -> CorrectionSet {
    let w1 = constrained_w1_ctrl(params).add(&pattern_operator(params, constrained_w1_diag_coefficient));
    CorrectionSet::new(FrameTag::Lab)
        .with(w1, Strategy::TruncatedIterative, 1)
        .with(pattern_operator(params, constrained_w2_coefficient), Strategy::SecondStandard, 2)
}

/// Intermediate results of the constrained-correction pipeline.
#[derive(Debug, Clone)]
pub struct ConstrainedPipeline {
    /// Ideal first-order control from the derivative-based construction.
    pub w1: TimeDepOperator,
    pub ibp: IbpResult,
    /// Implementable 1↔2 control after the iteration.
    pub w1_ctrl_b: TimeDepOperator,
    /// Same envelope driving the 0↔1 line as well.
    pub w1_ctrl_c: TimeDepOperator,
    pub w1_diag: TimeDepOperator,
    /// Second-order control truncated to the detuning pattern.
    pub w2_diag: TimeDepOperator,
    pub lambda: f64,
}

impl ConstrainedPipeline {
    /// Corrected pulse read off the pipeline operators.
    pub fn quadratures(&self, params: &TransmonParams, t: f64) -> Quadratures {
        let x = self.w1_ctrl_c.eval(t)[(0, 1)];
        let d1 = self.w1_diag.eval(t)[(0, 0)].re;
        let d2 = self.w2_diag.eval(t)[(0, 0)].re;
        Quadratures { kx: params.kappa(t, 0)[0] + x.re, ky: x.im, delta: d1 + d2 }
    }

    pub fn corrections(&self) -> CorrectionSet {
        CorrectionSet::new(FrameTag::Lab)
            .with(self.w1_ctrl_c.add(&self.w1_diag), Strategy::TruncatedIterative, 1)
            .with(self.w2_diag.clone(), Strategy::SecondStandard, 2)
    }
}

/// Split the ideal first-order control, iterate integration by parts twice,
/// drive the 0↔1 line with the same envelope, cancel the resulting phase
/// error with a detuning, then keep the detuning part of the second-order control.
pub fn constrained_pipeline(params: &TransmonParams, tol: f64) -> Result<ConstrainedPipeline> {
    let problem = build_transmon(params)?;
    let u0 = u0_result(params)?;
    let w1 = w1_derivative(&problem, &u0, W1Realization::Local)?;
    let split = split_controls(&w1, &Mask::from_elements(3, &[(1, 2)]))?;
    let ibp = iterative_ibp(&problem, &split, 2)?;
    let w1_ctrl_b = split.ctrl.add(&ibp.x);
    let lambda = params.lambda_rel;
    if lambda == 0.0 {
        return Err(Error::Precondition("single-line completion needs lambda > 0".into()));
    }
    let w1_ctrl_c = w1_ctrl_b.map_linear(move |m| {
        let mut out = m.clone();
        out[(0, 1)] += m[(1, 2)] / lambda;
        out[(1, 0)] += m[(2, 1)] / lambda;
        out
    });
    let w1_diag = phase_error_diagonal(&problem, &w1_ctrl_c, Some(&DETUNING_PATTERN), tol)?;
    let w2 = w2_standard(&problem, &w1_ctrl_c.add(&w1_diag), W2Form::Full, tol)?;
    let w2_diag = truncate_to_pattern(&w2, &DETUNING_PATTERN, 2)?;
    Ok(ConstrainedPipeline { w1, ibp, w1_ctrl_b, w1_ctrl_c, w1_diag, w2_diag, lambda })
}

/// First-order DRAG-style comparison pulse supplied from outside:
/// κ̃_y = y_coeff·λ²κ̇/Δ and δ = detuning_coeff·λ²κ²/Δ on the detuning pattern.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DragFormula {
    pub y_coeff: f64,
    pub detuning_coeff: f64,
}

/// Baseline correction, or `None` when no formula is configured.
pub fn drag_baseline(params: &TransmonParams, formula: Option<&DragFormula>) -> Option<CorrectionSet> {
    let f = *formula?;
    let p = *params;
    let op = TimeDepOperator::new(3, params.window(), move |t| {
        let k = p.kappa(t, 1);
        let (l2, d) = (p.lambda_rel * p.lambda_rel, p.anharmonicity);
        let line = ket_bra(3, 0, 1) + ket_bra(3, 1, 2) * r(p.lambda_rel);
        plus_hc(&(line * (I * (f.y_coeff * l2 * k[1] / d)))) + pattern_unit() * r(f.detuning_coeff * l2 * k[0] * k[0] / d)
    })
    .with_role(Role::Hamiltonian);
    Some(CorrectionSet::new(FrameTag::Lab).with(op, Strategy::Reference, 1))
}

/// Gate infidelity against the Hadamard target with optional corrections.
pub fn gate_infidelity(params: &TransmonParams, corrections: Option<&CorrectionSet>, tol: f64) -> Result<f64> {
    let problem = build_transmon(params)?;
    let mut h = problem.hamiltonian();
    if let Some(cs) = corrections {
        if !cs.is_empty() {
            h = h.add(&cs.total(3, problem.window));
        }
    }
    let u = propagate_final(&h, problem.window, tol)?;
    Ok((1.0 - gate_fidelity(&u, &problem.target_gate, &problem.partition)).max(0.0))
}

/// Correction protocols compared on the Hadamard gate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Protocol {
    Uncorrected,
    Ideal,
    Constrained,
}

impl Protocol {
    pub const ALL: [Protocol; 3] = [Protocol::Uncorrected, Protocol::Ideal, Protocol::Constrained];

    pub fn name(&self) -> &'static str {
        match self {
            Protocol::Uncorrected => "uncorrected",
            Protocol::Ideal => "ideal",
            Protocol::Constrained => "constrained",
        }
    }
}

pub fn protocol_infidelity(params: &TransmonParams, protocol: Protocol, tol: f64) -> Result<f64> {
    let cs = match protocol {
        Protocol::Uncorrected => None,
        Protocol::Ideal => Some(ideal_corrections(params)),
        Protocol::Constrained => Some(constrained_corrections(params)),
    };
    gate_infidelity(params, cs.as_ref(), tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ops::{max_abs, max_abs_diff, unitarity_defect};
    use crate::propagator::propagate;
    use crate::timedep::uniform_grid;

    fn params() -> TransmonParams {
        TransmonParams::new(0.2, 1.0)
    }

    #[test]
    fn pulse_area_gives_hadamard() {
        let p = params();
        assert!((p.phi(p.window().1) - PI / 4.0).abs() < 1e-12);
        let u = u0_matrix(&p, p.window().1);
        let block = Mat::from_fn(2, 2, |i, j| u[(i, j)]);
        assert!(max_abs_diff(&block, &hadamard_target()) < 1e-6);
        assert!(unitarity_defect(&hadamard_target()) < 1e-15);
    }

    #[test]
    fn closed_form_u0_matches_propagation() {
        let p = params();
        let problem = build_transmon(&p).unwrap();
        let num = propagate(&problem.h0, problem.window, 1e-12).unwrap();
        for t in uniform_grid(problem.window.0, problem.window.1, 9) {
            let u = u0_closed_form(&p, t).unwrap();
            assert!(max_abs_diff(u.matrix(), &num.u(t)) < 1e-9);
        }
        assert!(max_abs_diff(u0_closed_form(&p, p.window().0).unwrap().matrix(), &crate::ops::eye(3)) < 1e-15);
        assert!(u0_closed_form(&p.with_detuning(0.1), 0.0).is_err());
    }

    #[test]
    fn derivative_control_matches_printed_ideal_w1() {
        let p = params();
        let pipe = constrained_pipeline(&p, 1e-10).unwrap();
        let want = ideal_w1(&p);
        for t in uniform_grid(-4.0, 4.0, 17) {
            assert!(max_abs_diff(&pipe.w1.eval(t), &want.eval(t)) < 1e-10);
        }
    }

    #[test]
    fn pipeline_reproduces_printed_envelope() {
        let p = params();
        let pipe = constrained_pipeline(&p, 1e-10).unwrap();
        for t in uniform_grid(-4.0, 4.0, 17) {
            let (a, b) = (pipe.quadratures(&p, t), printed_quadratures(&p, t));
            assert!((a.kx - b.kx).abs() < 1e-10 && (a.ky - b.ky).abs() < 1e-10, "{t} {a:?} {b:?}");
            let d1 = pipe.w1_diag.eval(t)[(0, 0)].re;
            assert!((d1 - constrained_w1_diag_coefficient(&p, t)).abs() < 1e-7, "{t}");
        }
        assert!(max_abs_diff(&pipe.w1_ctrl_c.eval(0.3), &constrained_w1_ctrl(&p).eval(0.3)) < 1e-10);
    }

    #[test]
    fn vanishing_drive_gives_no_correction() {
        let p = params();
        let far = p.window().1;
        let q = printed_quadratures(&p, far);
        assert!(q.kx.abs() < 1e-15 && q.ky.abs() < 1e-15 && q.delta.abs() < 1e-15);
        assert!(printed_quadratures(&p, 0.0).ky.abs() < 1e-15);
        assert!(max_abs(&constrained_corrections(&p).total(3, p.window()).eval(far)) < 1e-15);
        let f = DragFormula { y_coeff: -0.5, detuning_coeff: 0.25 };
        assert!(drag_baseline(&p, None).is_none());
        let zero = drag_baseline(&p.with_lambda(0.0), Some(&f)).unwrap();
        assert!(max_abs(&zero.total(3, p.window()).eval(0.1)) < 1e-15);
    }
}
