//! Λ-system population transfer between |1⟩ and |3⟩ via |2⟩, driven by a
//! pump (1↔2) and a Stokes (2↔3) pulse.
//!
//! Adiabatic basis order is (|d⟩, |b₊⟩, |b₋⟩), lab basis order (|1⟩, |2⟩, |3⟩),
//! with |d⟩ = −cos θ|1⟩ + sin θ|3⟩ and |b±⟩ = (sin θ|1⟩ ± |2⟩ + cos θ|3⟩)/√2.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, SQRT_2};

use crate::corrections::Mask;
use crate::error::{Error, Result};
use crate::jet;
use crate::ode::{self, OdeOptions};
use crate::ops::{c, diag_real, eye, ket_bra, max_abs, plus_hc, r, zeros, Mat, OperatorMatrix, C64, I};
use crate::partition::HilbertPartition;
use crate::problem::LeakageProblem;
use crate::propagator::propagate_state;
use crate::timedep::{uniform_grid, TimeDepOperator};

pub const DEFAULT_DELTA: f64 = 1e-6;
/// Default Gaussian delay in units of 1/ν.
pub const DEFAULT_DELAY_PRODUCT: f64 = 1.3;
/// Relative size of lab 1↔3 or diagonal terms regarded as zero.
pub const LAB_COUPLING_TOL: f64 = 1e-8;
pub const AMPLITUDE_SAMPLES: usize = 4001;
const CHECK_SAMPLES: usize = 401;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    /// θ(t) = (π/2)/(1 + e^{−νt}) at constant gap G₀.
    Vitanov,
    /// Delayed Gaussian pump and Stokes pulses.
    Gaussian,
}

/// Where the Gaussian window starts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GaussianWindow {
    /// t₀ = √(−ln δ)/ν, so G_s(0) = δ·G₀ and G_p(t_f) = δ·G₀.
    StokesEdge,
    /// t₀ = √(−ln δ)/ν − τ, so G_p(0) = G_s(t_f) = δ·G₀.
    PumpEdge,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StirapParams {
    pub g0: f64,
    pub nu: f64,
    pub delta_bound: f64,
    /// Gaussian delay τ; `None` selects `DEFAULT_DELAY_PRODUCT / ν`.
    pub tau_delay: Option<f64>,
    pub shape: Shape,
    pub gaussian_window: GaussianWindow,
}

impl StirapParams {
    pub fn vitanov(g0: f64, nu: f64) -> Self {
        Self { g0, nu, delta_bound: DEFAULT_DELTA, tau_delay: None, shape: Shape::Vitanov, gaussian_window: GaussianWindow::PumpEdge }
    }

    pub fn gaussian(g0: f64, nu: f64) -> Self {
        Self { shape: Shape::Gaussian, ..Self::vitanov(g0, nu) }
    }

    pub fn with_nu(mut self, nu: f64) -> Self {
        self.nu = nu;
        self
    }

    pub fn with_delay(mut self, tau: f64) -> Self {
        self.tau_delay = Some(tau);
        self
    }

    pub fn with_delta_bound(mut self, delta: f64) -> Self {
        self.delta_bound = delta;
        self
    }

    pub fn with_gaussian_window(mut self, w: GaussianWindow) -> Self {
        self.gaussian_window = w;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.g0 > 0.0 && self.g0.is_finite()) {
            return Err(Error::Param(format!("g0 must be positive, got {}", self.g0)));
        }
        if !(self.nu > 0.0 && self.nu.is_finite()) {
            return Err(Error::Param(format!("nu must be positive, got {}", self.nu)));
        }
        if !(self.delta_bound > 0.0 && self.delta_bound < 0.1) {
            return Err(Error::Param(format!("delta_bound must lie in (0, 0.1), got {}", self.delta_bound)));
        }
        if let Some(tau) = self.tau_delay {
            if !(tau > 0.0 && tau.is_finite()) {
                return Err(Error::Param(format!("tau_delay must be positive, got {tau}")));
            }
        }
        if self.shape == Shape::Gaussian && self.gaussian_window == GaussianWindow::PumpEdge && self.t0() <= 0.0 {
            return Err(Error::Param(format!("delay {} too long for delta_bound {}", self.tau(), self.delta_bound)));
        }
        Ok(())
    }

    pub fn tau(&self) -> f64 {
        self.tau_delay.unwrap_or(DEFAULT_DELAY_PRODUCT / self.nu)
    }

    /// Centre of the Stokes pulse.
    pub fn t0(&self) -> f64 {
        let edge = (-self.delta_bound.ln()).sqrt() / self.nu;
        match self.gaussian_window {
            GaussianWindow::StokesEdge => edge,
            GaussianWindow::PumpEdge => edge - self.tau(),
        }
    }

    pub fn window(&self) -> (f64, f64) {
        match self.shape {
            Shape::Vitanov => {
                let d = self.delta_bound;
                let ti = -(-1.0 + FRAC_PI_2 / d.asin()).ln() / self.nu;
                let tf = -(-1.0 + FRAC_PI_2 / d.acos()).ln() / self.nu;
                (ti, tf)
            }
            Shape::Gaussian => (0.0, 2.0 * self.t0() + self.tau()),
        }
    }

    /// Mixing angle θ and its derivatives 0..=n.
    pub fn theta(&self, t: f64, n: usize) -> Vec<f64> {
        match self.shape {
            Shape::Vitanov => jet::affine(&jet::logistic(self.nu * t, n), self.nu).into_iter().map(|v| FRAC_PI_2 * v).collect(),
            Shape::Gaussian => {
                let rate = 2.0 * self.nu * self.nu * self.tau();
                let u = rate * (t - self.t0() - 0.5 * self.tau());
                let theta = if u > 0.0 { FRAC_PI_2 - (-u).exp().atan() } else { u.exp().atan() };
                let mut out = vec![theta];
                if n > 0 {
                    let s = jet::sech(u, n - 1);
                    let mut p = rate;
                    for v in s {
                        out.push(0.5 * v * p);
                        p *= rate;
                    }
                }
                out
            }
        }
    }

    /// Pump amplitude G_p and its derivatives.
    pub fn pump(&self, t: f64, n: usize) -> Vec<f64> {
        match self.shape {
            Shape::Vitanov => jet::sin_cos(&self.theta(t, n)).0.into_iter().map(|v| self.g0 * v).collect(),
            Shape::Gaussian => self.gaussian_pulse(t - self.t0() - self.tau(), n),
        }
    }

    /// Stokes amplitude G_s and its derivatives.
    pub fn stokes(&self, t: f64, n: usize) -> Vec<f64> {
        match self.shape {
            Shape::Vitanov => jet::sin_cos(&self.theta(t, n)).1.into_iter().map(|v| self.g0 * v).collect(),
            Shape::Gaussian => self.gaussian_pulse(t - self.t0(), n),
        }
    }

    fn gaussian_pulse(&self, x: f64, n: usize) -> Vec<f64> {
        jet::affine(&jet::gaussian(self.nu * x, n), self.nu).into_iter().map(|v| self.g0 * v).collect()
    }

    /// Gap G = √(G_p² + G_s²) and its derivatives.
    pub fn gap(&self, t: f64, n: usize) -> Vec<f64> {
        match self.shape {
            Shape::Vitanov => {
                let mut out = vec![0.0; n + 1];
                out[0] = self.g0;
                out
            }
            Shape::Gaussian => {
                let (p, s) = (self.pump(t, n), self.stokes(t, n));
                let sq: Vec<f64> = jet::mul_scalar(&p, &p).iter().zip(jet::mul_scalar(&s, &s)).map(|(a, b)| a + b).collect();
                jet::sqrt(&sq)
            }
        }
    }
}

/// diag(0, 1, −1): |b₊⟩⟨b₊| − |b₋⟩⟨b₋|.
pub fn h0_unit() -> Mat {
    diag_real(&[0.0, 1.0, -1.0])
}

/// i(|d⟩⟨b₊| + |d⟩⟨b₋|) + H.c.
pub fn v_unit() -> Mat {
    plus_hc(&((ket_bra(3, 0, 1) + ket_bra(3, 0, 2)) * I))
}

/// |d⟩⟨b₋| − |d⟩⟨b₊| + H.c.
pub fn w1_unit() -> Mat {
    plus_hc(&(ket_bra(3, 0, 2) - ket_bra(3, 0, 1)))
}

/// |b₋⟩⟨b₋| − |b₊⟩⟨b₊|.
pub fn w2_unit() -> Mat {
    diag_real(&[0.0, -1.0, 1.0])
}

pub fn partition() -> HilbertPartition {
    HilbertPartition::new(3, 1, vec!["d".into(), "b+".into(), "b-".into()]).expect("valid partition")
}

/// Lab-to-adiabatic frame S(t) whose columns are |d⟩, |b₊⟩, |b₋⟩.
pub fn frame(params: &StirapParams) -> TimeDepOperator {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut cc = zeros(3);
    let mut cs = zeros(3);
    let mut c1 = zeros(3);
    cc[(0, 0)] = r(-1.0);
    cs[(2, 0)] = r(1.0);
    cs[(0, 1)] = r(h);
    c1[(1, 1)] = r(h);
    cc[(2, 1)] = r(h);
    cs[(0, 2)] = r(h);
    c1[(1, 2)] = r(-h);
    cc[(2, 2)] = r(h);
    let p = *params;
    TimeDepOperator::from_jet(3, params.window(), move |t, n| {
        let (s, co) = jet::sin_cos(&p.theta(t, n));
        (0..=n).map(|k| &cc * r(co[k]) + &cs * r(s[k]) + if k == 0 { c1.clone() } else { zeros(3) }).collect()
    })
}

/// G_p|1⟩⟨2| + G_s|2⟩⟨3| + H.c.
pub fn lab_hamiltonian(params: &StirapParams) -> TimeDepOperator {
    let p = *params;
    let e12 = plus_hc(&ket_bra(3, 0, 1));
    let e23 = plus_hc(&ket_bra(3, 1, 2));
    TimeDepOperator::from_jet(3, params.window(), move |t, n| {
        let (gp, gs) = (p.pump(t, n), p.stokes(t, n));
        (0..=n).map(|k| &e12 * r(gp[k]) + &e23 * r(gs[k])).collect()
    })
    .with_role(crate::ops::Role::Hamiltonian)
}

fn h0_op(params: &StirapParams) -> TimeDepOperator {
    let p = *params;
    TimeDepOperator::scalar_times(h0_unit(), params.window(), move |t, n| p.gap(t, n)).with_role(crate::ops::Role::Hamiltonian)
}

fn v_op(params: &StirapParams) -> TimeDepOperator {
    let p = *params;
    TimeDepOperator::scalar_times(v_unit(), params.window(), move |t, n| {
        p.theta(t, n + 1)[1..].iter().map(|v| v / SQRT_2).collect()
    })
    .with_role(crate::ops::Role::Hamiltonian)
}

fn build_any(params: &StirapParams) -> Result<LeakageProblem> {
    params.validate()?;
    LeakageProblem::new(partition(), h0_op(params), v_op(params), 1.0, params.window(), eye(1))
}

/// Adiabatic-frame problem for the constant-gap shape.
pub fn build_constant_gap(params: &StirapParams) -> Result<LeakageProblem> {
    if params.shape != Shape::Vitanov {
        return Err(Error::Param("build_constant_gap needs the vitanov shape".into()));
    }
    build_any(params)
}

/// Adiabatic-frame problem for Gaussian pulses on [0, t_f].
pub fn build_gaussian(params: &StirapParams) -> Result<LeakageProblem> {
    if params.shape != Shape::Gaussian {
        return Err(Error::Param("build_gaussian needs the gaussian shape".into()));
    }
    build_any(params)
}

pub fn build(params: &StirapParams) -> Result<LeakageProblem> {
    build_any(params)
}

/// Controls available in the lab: the pump and Stokes couplings, both
/// quadratures, viewed in the adiabatic frame.
pub fn lab_mask(params: &StirapParams) -> Mask {
    Mask::from_elements(3, &[(0, 1), (1, 2)]).in_frame(frame(params))
}

fn theta_scaled(params: &StirapParams, unit: Mat, order: usize, k: f64) -> TimeDepOperator {
    let p = *params;
    let g0 = params.g0;
    TimeDepOperator::scalar_times(unit, params.window(), move |t, n| {
        let th = p.theta(t, n + order);
        match order {
            2 => th[2..].iter().map(|v| k * v / (SQRT_2 * g0)).collect(),
            _ => jet::mul_scalar(&th[1..], &th[1..]).into_iter().map(|v| k * v / (2.0 * g0)).collect(),
        }
    })
    .with_role(crate::ops::Role::Hamiltonian)
}

/// θ̈/(√2G₀)·(|d⟩⟨b₋| − |d⟩⟨b₊| + H.c.).
pub fn w1_closed_form(params: &StirapParams) -> TimeDepOperator {
    theta_scaled(params, w1_unit(), 2, 1.0)
}

/// θ̇²/(2G₀)·(|b₋⟩⟨b₋| − |b₊⟩⟨b₊|).
pub fn w2_closed_form(params: &StirapParams) -> TimeDepOperator {
    theta_scaled(params, w2_unit(), 1, 1.0)
}

/// Second-order part of the approximate optimal control, θ̇²/(3G₀)·(|b₋⟩⟨b₋| − |b₊⟩⟨b₊|).
pub fn w2_optimal_closed_form(params: &StirapParams) -> TimeDepOperator {
    theta_scaled(params, w2_unit(), 1, 2.0 / 3.0)
}

fn satd_coefficient(params: &StirapParams, t: f64) -> f64 {
    let th = params.theta(t, 2);
    let x = th[1] / params.g0;
    th[2] / (SQRT_2 * params.g0) / (1.0 + x * x)
}

/// Superadiabatic transitionless-driving term at time t.
pub fn satd_reference(params: &StirapParams, t: f64) -> Result<OperatorMatrix> {
    OperatorMatrix::hamiltonian(w1_unit() * r(satd_coefficient(params, t)))
}

pub fn satd_operator(params: &StirapParams) -> TimeDepOperator {
    let p = *params;
    TimeDepOperator::new(3, params.window(), move |t| w1_unit() * r(satd_coefficient(&p, t))).with_role(crate::ops::Role::Hamiltonian)
}

/// Amplitude θ̈/(√2 G(t)) of the first-order correction with the constant
/// gap replaced by the instantaneous one; defined for any real t.
pub fn naive_drag_amplitude(params: &StirapParams, t: f64) -> f64 {
    params.theta(t, 2)[2].abs() / (SQRT_2 * params.gap(t, 0)[0])
}

/// 1 − |⟨d|U(t_f)|d⟩|² in the adiabatic frame with an optional extra term.
pub fn dark_state_infidelity(problem: &LeakageProblem, extra: Option<&TimeDepOperator>, tol: f64) -> Result<f64> {
    let h = match extra {
        Some(w) => problem.hamiltonian().add(w),
        None => problem.hamiltonian(),
    };
    let mut psi0 = vec![c(0.0, 0.0); problem.dim()];
    psi0[0] = c(1.0, 0.0);
    let psi = propagate_state(&h, problem.window, &psi0, tol)?;
    Ok((1.0 - psi[0].norm_sqr()).max(0.0))
}

/// 1 − |⟨3|U(t_f)|1⟩|² for lab pulses.
pub fn lab_transfer_infidelity(pulses: &LabPulses, tol: f64) -> Result<f64> {
    let h = pulses.hamiltonian();
    let psi = propagate_state(&h, h.window(), &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)], tol)?;
    Ok((1.0 - psi[2].norm_sqr()).max(0.0))
}

/// Lab-frame pump and Stokes pulses realising H₀ + V + W in the adiabatic frame.
#[derive(Debug, Clone)]
pub struct LabPulses {
    params: StirapParams,
    frame: TimeDepOperator,
    adiabatic: TimeDepOperator,
}

impl LabPulses {
    /// S(H₀ + W)S†; the frame term −iS†Ṡ reproduces V.
    pub fn matrix(&self, t: f64) -> Mat {
        let s = self.frame.eval(t);
        let m = &s * self.adiabatic.eval(t) * s.adjoint();
        (&m + m.adjoint()) * r(0.5)
    }

    pub fn gp(&self, t: f64) -> C64 {
        self.matrix(t)[(0, 1)]
    }

    pub fn gs(&self, t: f64) -> C64 {
        self.matrix(t)[(1, 2)]
    }

    pub fn params(&self) -> &StirapParams {
        &self.params
    }

    pub fn hamiltonian(&self) -> TimeDepOperator {
        let me = self.clone();
        TimeDepOperator::new(3, self.params.window(), move |t| me.matrix(t)).with_role(crate::ops::Role::Hamiltonian)
    }

    /// max over the window of max(|G_p|, |G_s|), sampled on `samples` points.
    pub fn max_amplitude(&self, samples: usize) -> f64 {
        let (a, b) = self.params.window();
        uniform_grid(a, b, samples)
            .into_iter()
            .map(|t| {
                let m = self.matrix(t);
                m[(0, 1)].norm().max(m[(1, 2)].norm())
            })
            .fold(0.0, f64::max)
    }
}

/// Map a correction back to lab-frame pulses. Fails with the offending lab
/// elements if the correction needs a 1↔3 coupling or a detuning.
pub fn corrected_lab_pulses(params: &StirapParams, w: Option<&TimeDepOperator>) -> Result<LabPulses> {
    params.validate()?;
    let h0 = h0_op(params);
    let adiabatic = match w {
        Some(w) => h0.add(w),
        None => h0,
    };
    let pulses = LabPulses { params: *params, frame: frame(params), adiabatic };
    let (a, b) = params.window();
    let mut bad: Vec<(usize, usize)> = Vec::new();
    for t in uniform_grid(a, b, CHECK_SAMPLES) {
        let m = pulses.matrix(t);
        let tol = LAB_COUPLING_TOL * (params.g0 + max_abs(&m));
        for (i, j) in [(0, 0), (1, 1), (2, 2), (0, 2)] {
            if m[(i, j)].norm() > tol && !bad.contains(&(i, j)) {
                bad.push((i, j));
            }
        }
    }
    if bad.is_empty() {
        Ok(pulses)
    } else {
        bad.sort_unstable();
        Err(Error::ForbiddenCoupling(bad))
    }
}

/// Constant-gap correction protocols.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Protocol {
    Uncorrected,
    First,
    FirstSecond,
    Optimal,
    Satd,
}

impl Protocol {
    pub const ALL: [Protocol; 5] = [Protocol::Uncorrected, Protocol::First, Protocol::FirstSecond, Protocol::Optimal, Protocol::Satd];

    pub fn name(&self) -> &'static str {
        match self {
            Protocol::Uncorrected => "uncorrected",
            Protocol::First => "w1",
            Protocol::FirstSecond => "w1w2",
            Protocol::Optimal => "optimal",
            Protocol::Satd => "satd",
        }
    }
}

/// Closed-form correction for a constant-gap protocol.
pub fn protocol_correction(params: &StirapParams, protocol: Protocol) -> Option<TimeDepOperator> {
    match protocol {
        Protocol::Uncorrected => None,
        Protocol::First => Some(w1_closed_form(params)),
        Protocol::FirstSecond => Some(w1_closed_form(params).add(&w2_closed_form(params))),
        Protocol::Optimal => Some(w1_closed_form(params).add(&w2_optimal_closed_form(params))),
        Protocol::Satd => Some(satd_operator(params)),
    }
}

/// Transfer infidelity of a constant-gap protocol.
pub fn protocol_infidelity(params: &StirapParams, protocol: Protocol, tol: f64) -> Result<f64> {
    let problem = build_constant_gap(params)?;
    dark_state_infidelity(&problem, protocol_correction(params, protocol).as_ref(), tol)
}

/// Largest lab pulse amplitude of a constant-gap protocol.
pub fn protocol_max_amplitude(params: &StirapParams, protocol: Protocol) -> Result<f64> {
    let w = protocol_correction(params, protocol);
    Ok(corrected_lab_pulses(params, w.as_ref())?.max_amplitude(AMPLITUDE_SAMPLES))
}

/// Speed ν at which the largest lab amplitude of `protocol` first reaches G₀.
pub fn amplitude_boundary(g0: f64, protocol: Protocol, bracket: (f64, f64)) -> Result<f64> {
    let f = |nu: f64| {
        protocol_max_amplitude(&StirapParams::vitanov(g0, nu), protocol).map(|a| a / g0 - 1.0).unwrap_or(f64::NAN)
    };
    crate::sweep::bisect(f, bracket.0, bracket.1, 1e-6 * bracket.1)
}

/// Running phase Δ(t) = ∫₀ᵗ G and I(t) = ∫₀ᵗ e^{iΔ}γ with γ = (αG/G₀ − 1)θ̇.
#[derive(Debug, Clone)]
pub struct GaussianPhase {
    params: StirapParams,
    alpha: f64,
    sol: ode::DenseSolution,
}

impl GaussianPhase {
    pub fn new(params: &StirapParams, alpha: f64, tol: f64) -> Result<Self> {
        params.validate()?;
        let p = *params;
        let (a, b) = params.window();
        let rhs = move |t: f64, y: &[C64], dy: &mut [C64]| {
            let g = p.gap(t, 0)[0];
            let thd = p.theta(t, 1)[1];
            let ph = C64::from_polar(1.0, y[0].re);
            dy[0] = r(g);
            dy[1] = ph * ((alpha * g / p.g0 - 1.0) * thd);
            dy[2] = ph * (g * thd / p.g0);
            dy[3] = ph * thd;
        };
        let sol = ode::solve(rhs, a, b, &[c(0.0, 0.0); 4], OdeOptions::new(tol).h_max((b - a) / 200.0))?;
        Ok(Self { params: *params, alpha, sol })
    }

    pub fn delta(&self, t: f64) -> f64 {
        self.sol.eval(t)[0].re
    }

    pub fn integral(&self, t: f64) -> C64 {
        self.sol.eval(t)[1]
    }

    /// A = ∫e^{iΔ}Gθ̇/G₀ over the window.
    pub fn a_total(&self) -> C64 {
        self.sol.y_final()[2]
    }

    /// ξ = ∫e^{iΔ}θ̇ over the window.
    pub fn xi(&self) -> C64 {
        self.sol.y_final()[3]
    }

    /// β(α, t) of the second-order Gaussian correction.
    pub fn beta(&self, t: f64) -> f64 {
        let y = self.sol.eval(t);
        let th = self.params.theta(t, 2);
        let e = C64::from_polar(1.0, -y[0].re);
        (e * th[1] / 2.0 * y[1]).im + (e * (self.alpha * th[2] / (2.0 * self.params.g0)) * y[1]).re
    }
}

/// Variational α for the Gaussian generating function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianAlpha {
    pub alpha: f64,
    /// F̄ at α.
    pub fbar: f64,
    pub a: C64,
    pub b: C64,
}

/// F̄[α] = 1/4 + (1/12)(1 + 2cos|αA − B|)².
pub fn gaussian_fbar(a: C64, b: C64, alpha: f64) -> f64 {
    let x = (a * alpha - b).norm();
    0.25 + (1.0 + 2.0 * x.cos()).powi(2) / 12.0
}

/// α minimising |∫e^{iΔ}γ|, clamped to `bracket`.
pub fn gaussian_alpha(params: &StirapParams, bracket: (f64, f64), tol: f64) -> Result<GaussianAlpha> {
    let ph = GaussianPhase::new(params, 0.0, tol)?;
    let (a, b) = (ph.a_total(), ph.xi());
    let alpha = ((a.conj() * b).re / a.norm_sqr()).clamp(bracket.0, bracket.1);
    Ok(GaussianAlpha { alpha, fbar: gaussian_fbar(a, b, alpha), a, b })
}

/// Attainable first-order Gaussian control α·θ̈/(√2G₀)·(|d⟩⟨b₋| − |d⟩⟨b₊| + H.c.).
pub fn gaussian_w1(params: &StirapParams, alpha: f64) -> TimeDepOperator {
    theta_scaled(params, w1_unit(), 2, alpha)
}

/// Generating function R(α, t) in the adiabatic frame.
pub fn gaussian_generator(params: &StirapParams, alpha: f64, tol: f64) -> Result<TimeDepOperator> {
    let ph = GaussianPhase::new(params, alpha, tol)?;
    let p = *params;
    Ok(TimeDepOperator::new(3, params.window(), move |t| {
        let d = ph.delta(t);
        let k = p.theta(t, 1)[1] / p.g0;
        let m = ket_bra(3, 0, 1) * (-C64::from_polar(k, -d)) + ket_bra(3, 0, 2) * C64::from_polar(k, d);
        let m = &m - m.adjoint();
        m * (c(0.0, -alpha / SQRT_2))
    }))
}

/// Second-order Gaussian control (αθ̇²/(2G₀) + β)(|b₋⟩⟨b₋| − |b₊⟩⟨b₊|).
pub fn gaussian_w2(params: &StirapParams, alpha: f64, tol: f64) -> Result<TimeDepOperator> {
    let ph = GaussianPhase::new(params, alpha, tol)?;
    let p = *params;
    Ok(TimeDepOperator::new(3, params.window(), move |t| {
        let thd = p.theta(t, 1)[1];
        w2_unit() * r(alpha * thd * thd / (2.0 * p.g0) + ph.beta(t))
    })
    .with_role(crate::ops::Role::Hamiltonian))
}

/// Gaussian protocols: uncorrected, first order, first plus second order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GaussianOrder {
    Uncorrected,
    First,
    Second,
}

/// Adiabatic-frame correction of a Gaussian protocol with variational α in `bracket`.
pub fn gaussian_correction(params: &StirapParams, order: GaussianOrder, bracket: (f64, f64), tol: f64) -> Result<Option<TimeDepOperator>> {
    Ok(match order {
        GaussianOrder::Uncorrected => None,
        GaussianOrder::First => Some(gaussian_w1(params, gaussian_alpha(params, bracket, tol)?.alpha)),
        GaussianOrder::Second => {
            let alpha = gaussian_alpha(params, bracket, tol)?.alpha;
            Some(gaussian_w1(params, alpha).add(&gaussian_w2(params, alpha, tol)?))
        }
    })
}

/// Transfer infidelity of the Gaussian protocol with variational α in `bracket`.
pub fn gaussian_infidelity(params: &StirapParams, order: GaussianOrder, bracket: (f64, f64), tol: f64) -> Result<f64> {
    let problem = build_gaussian(params)?;
    let w = gaussian_correction(params, order, bracket, tol)?;
    dark_state_infidelity(&problem, w.as_ref(), tol)
}

/// |ξ(t_f)|² with ξ = ∫e^{iΔ}θ̇.
pub fn approx_infidelity_gaussian(params: &StirapParams, tol: f64) -> Result<f64> {
    if params.shape != Shape::Gaussian {
        return Err(Error::Param("approx_infidelity_gaussian needs the gaussian shape".into()));
    }
    Ok(GaussianPhase::new(params, 0.0, tol)?.xi().norm_sqr())
}

/// θ at the window midpoint; π/4 for symmetric pulses.
pub fn midpoint_angle(params: &StirapParams) -> f64 {
    let (a, b) = params.window();
    params.theta(0.5 * (a + b), 0)[0]
}

pub const MIDPOINT_ANGLE: f64 = FRAC_PI_4;
