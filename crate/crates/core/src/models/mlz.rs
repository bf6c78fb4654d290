//! Multiple-crossings Landau–Zener sweep: a qubit (|0⟩, |1⟩) swept through
//! its avoided crossing, with two spurious linearly-swept levels |2⟩, |3⟩.
//!
//! Lab basis order is (|0⟩, |1⟩, |2⟩, |3⟩). The superadiabatic frame S(τ)
//! acts on the qubit block only; its columns are |0̃⟩ (energy +Λ) and |1̃⟩
//! (energy −Λ), Λ = √(4E⁶ + η²)/(2E²), E = √(τ² + η²). The ground-state
//! path |0⟩ → |1⟩ follows |1̃⟩.

use crate::corrections::{w1_from_generator, w2_standard, CorrectionSet, FrameTag, Strategy, W2Form};
use crate::error::{Error, Result};
use crate::jet;
use crate::ops::{c, eigh, from_rows, ket_bra, plus_hc, r, zeros, Mat, OperatorMatrix, C64};
use crate::partition::HilbertPartition;
use crate::problem::LeakageProblem;
use crate::propagator::propagate_state;
use crate::timedep::{uniform_grid, TimeDepOperator};

pub const DEFAULT_WINDOW: (f64, f64) = (-20.0, 20.0);
pub const SMOOTHNESS_SAMPLES: usize = 4001;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlzParams {
    pub eta: f64,
    pub eta12: f64,
    pub eta03: f64,
    pub eta23: f64,
    pub omega2: f64,
    pub omega3: f64,
    pub window: (f64, f64),
}

impl MlzParams {
    /// All couplings equal to η, both offsets equal to ω.
    pub fn equal(eta: f64, omega: f64) -> Self {
        Self { eta, eta12: eta, eta03: eta, eta23: eta, omega2: omega, omega3: omega, window: DEFAULT_WINDOW }
    }

    /// Bare two-level problem embedded in four levels.
    pub fn qubit_only(eta: f64) -> Self {
        Self { eta, eta12: 0.0, eta03: 0.0, eta23: 0.0, omega2: 0.0, omega3: 0.0, window: DEFAULT_WINDOW }
    }

    pub fn with_eta(mut self, eta: f64) -> Self {
        self.eta = eta;
        self
    }

    /// Scales the three spurious couplings.
    pub fn with_spurious_scale(mut self, s: f64) -> Self {
        self.eta12 *= s;
        self.eta03 *= s;
        self.eta23 *= s;
        self
    }

    pub fn with_window(mut self, window: (f64, f64)) -> Self {
        self.window = window;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::Param(format!("eta must be positive, got {}", self.eta)));
        }
        for (name, v) in [("eta12", self.eta12), ("eta03", self.eta03), ("eta23", self.eta23)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Param(format!("{name} must be non-negative, got {v}")));
            }
        }
        if !(self.omega2.is_finite() && self.omega3.is_finite()) {
            return Err(Error::Param("offsets must be finite".into()));
        }
        if !(self.window.0 < self.window.1) {
            return Err(Error::Param(format!("empty window [{}, {}]", self.window.0, self.window.1)));
        }
        Ok(())
    }

    pub fn equal_couplings(&self) -> bool {
        self.eta12 == self.eta && self.eta03 == self.eta && self.eta23 == self.eta
    }
}

pub fn partition() -> HilbertPartition {
    HilbertPartition::new(4, 2, vec!["0".into(), "1".into(), "2".into(), "3".into()]).expect("static partition")
}

/// σ_z = |1⟩⟨1| − |0⟩⟨0| on the qubit block.
pub fn sigma_z() -> Mat {
    ket_bra(4, 1, 1) - ket_bra(4, 0, 0)
}

pub fn sigma_x() -> Mat {
    plus_hc(&ket_bra(4, 0, 1))
}

/// σ_y = i|0⟩⟨1| − i|1⟩⟨0|, consistent with the σ_z above.
pub fn sigma_y() -> Mat {
    plus_hc(&(ket_bra(4, 0, 1) * c(0.0, 1.0)))
}

/// Qubit-leakage couplings η₁₂(|1⟩⟨2| + h.c.) + η₀₃(|0⟩⟨3| + h.c.).
pub fn lab_coupling(params: &MlzParams) -> Mat {
    plus_hc(&(ket_bra(4, 1, 2) * r(params.eta12) + ket_bra(4, 0, 3) * r(params.eta03)))
}

fn lab_h0_parts(params: &MlzParams) -> (Mat, Mat) {
    let slope = -sigma_z() + ket_bra(4, 2, 2) - ket_bra(4, 3, 3);
    let offset = sigma_x() * r(params.eta)
        + ket_bra(4, 2, 2) * r(params.omega2)
        + ket_bra(4, 3, 3) * r(params.omega3)
        + plus_hc(&ket_bra(4, 2, 3)) * r(params.eta23);
    (slope, offset)
}

/// H_LZ + H_aux: the block-diagonal lab Hamiltonian.
pub fn lab_h0(params: &MlzParams) -> TimeDepOperator {
    let (slope, offset) = lab_h0_parts(params);
    TimeDepOperator::from_jet(4, params.window, move |t, n| {
        let mut out = vec![&slope * r(t) + &offset];
        if n >= 1 {
            out.push(slope.clone());
        }
        out.extend((2..=n).map(|_| zeros(4)));
        out
    })
}

pub fn lab_hamiltonian(params: &MlzParams) -> TimeDepOperator {
    lab_h0(params).add(&TimeDepOperator::constant(lab_coupling(params), params.window))
}

/// Lab-frame problem: H₀ = H_LZ + H_aux, V = qubit-leakage couplings.
pub fn build_mlz(params: &MlzParams) -> Result<LeakageProblem> {
    params.validate()?;
    let v = TimeDepOperator::constant(lab_coupling(params), params.window);
    let not = from_rows(&[&[r(0.0), r(1.0)], &[r(1.0), r(0.0)]]);
    LeakageProblem::new(partition(), lab_h0(params), v, 1.0, params.window, not)
}

/// Transitionless driving η/(2(τ² + η²))σ_y.
pub fn td_reference(params: &MlzParams, tau: f64) -> OperatorMatrix {
    let e2 = tau * tau + params.eta * params.eta;
    OperatorMatrix::generic(sigma_y() * r(params.eta / (2.0 * e2)))
}

/// Superadiabatic transitionless driving in σ_z, σ_x.
pub fn satd_reference(params: &MlzParams, tau: f64) -> OperatorMatrix {
    let (a, b) = satd_coefficients(params.eta, tau);
    OperatorMatrix::generic(sigma_z() * r(a) + sigma_x() * r(b))
}

fn satd_coefficients(eta: f64, tau: f64) -> (f64, f64) {
    let e2 = tau * tau + eta * eta;
    let den = 4.0 * e2 * e2 * e2 + eta * eta;
    (3.0 * eta * eta * tau / den, 3.0 * eta * tau * tau / den)
}

pub fn td_operator(params: &MlzParams) -> TimeDepOperator {
    let p = *params;
    TimeDepOperator::new(4, params.window, move |t| td_reference(&p, t).into_matrix())
}

pub fn satd_operator(params: &MlzParams) -> TimeDepOperator {
    let p = *params;
    TimeDepOperator::new(4, params.window, move |t| satd_reference(&p, t).into_matrix())
}

fn poly(t: f64, coeffs: &[f64], n: usize) -> Vec<f64> {
    // Jet of a polynomial Σ cₖ tᵏ.
    let mut cur = coeffs.to_vec();
    let mut out = Vec::with_capacity(n + 1);
    for _ in 0..=n {
        out.push(cur.iter().rev().fold(0.0, |acc, &ck| acc * t + ck));
        cur = cur.iter().enumerate().skip(1).map(|(k, &ck)| k as f64 * ck).collect();
        if cur.is_empty() {
            cur.push(0.0);
        }
    }
    out
}

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn scal(s: f64, a: &[f64]) -> Vec<f64> {
    a.iter().map(|x| s * x).collect()
}

fn div(a: &[f64], b: &[f64]) -> Vec<f64> {
    jet::mul_scalar(a, &jet::recip(b))
}

fn constant(v: f64, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n + 1];
    out[0] = v;
    out
}

struct QubitJets {
    /// Real and imaginary parts of S_{ab}, a lab index, b frame index.
    re: [[Vec<f64>; 2]; 2],
    im: [[Vec<f64>; 2]; 2],
    lambda: Vec<f64>,
}

fn qubit_jets(eta: f64, t: f64, n: usize) -> QubitJets {
    let eta2 = eta * eta;
    let s = poly(t, &[eta2, 0.0, 1.0], n);
    let e = jet::sqrt(&s);
    let tj = poly(t, &[0.0, 1.0], n);
    let minus_eta2 = constant(-eta2, n);
    // (τ + E)(τ − E) = −η²; evaluate the non-cancelling factor directly.
    let (tpe, tme) = if t >= 0.0 {
        let tpe = add(&tj, &e);
        let tme = div(&minus_eta2, &tpe);
        (tpe, tme)
    } else {
        let tme = add(&tj, &scal(-1.0, &e));
        let tpe = div(&minus_eta2, &tme);
        (tpe, tme)
    };
    let eta_j = constant(eta, n);
    let sq = |a: &[f64]| jet::mul_scalar(a, a);
    let np = jet::sqrt(&add(&sq(&tpe), &constant(eta2, n)));
    let nm = jet::sqrt(&add(&sq(&tme), &constant(eta2, n)));
    let up = [div(&tpe, &np), div(&eta_j, &np)];
    let um = [div(&tme, &nm), div(&eta_j, &nm)];
    let s3 = jet::mul_scalar(&s, &sq(&s));
    let l = jet::sqrt(&add(&scal(4.0, &s3), &constant(eta2, n)));
    let e3 = jet::mul_scalar(&s, &e);
    let xp = add(&scal(2.0, &e3), &l);
    let xm = div(&minus_eta2, &xp);
    let mp = jet::sqrt(&add(&sq(&xp), &constant(eta2, n)));
    let mm = jet::sqrt(&add(&sq(&xm), &constant(eta2, n)));
    // |0̃⟩ = (η u₊ − iX₋ u₋)/m₋, |1̃⟩ = (η u₊ − iX₊ u₋)/m₊.
    let col = |x: &[f64], m: &[f64], a: usize| -> (Vec<f64>, Vec<f64>) {
        let re = div(&scal(eta, &up[a]), m);
        let im = scal(-1.0, &div(&jet::mul_scalar(x, &um[a]), m));
        (re, im)
    };
    let (r00, i00) = col(&xm, &mm, 0);
    let (r10, i10) = col(&xm, &mm, 1);
    let (r01, i01) = col(&xp, &mp, 0);
    let (r11, i11) = col(&xp, &mp, 1);
    let lambda = div(&l, &scal(2.0, &s));
    QubitJets { re: [[r00, r01], [r10, r11]], im: [[i00, i01], [i10, i11]], lambda }
}

fn frame_jet(eta: f64, t: f64, n: usize) -> Vec<Mat> {
    let q = qubit_jets(eta, t, n);
    (0..=n)
        .map(|k| {
            let mut m = zeros(4);
            for a in 0..2 {
                for b in 0..2 {
                    m[(a, b)] = c(q.re[a][b][k], q.im[a][b][k]);
                }
            }
            if k == 0 {
                m[(2, 2)] = r(1.0);
                m[(3, 3)] = r(1.0);
            }
            m
        })
        .collect()
}

/// Superadiabatic qubit energy Λ(τ) = √(4E⁶ + η²)/(2E²).
pub fn sad_gap(eta: f64, tau: f64) -> f64 {
    let e2 = tau * tau + eta * eta;
    (4.0 * e2 * e2 * e2 + eta * eta).sqrt() / (2.0 * e2)
}

/// S(τ) and the diagonal H₀,SAD(τ) = diag(Λ, −Λ, τ + ω₂, −(τ − ω₃)).
pub fn superadiabatic_frame(params: &MlzParams) -> Result<(TimeDepOperator, TimeDepOperator)> {
    params.validate()?;
    let eta = params.eta;
    let s = TimeDepOperator::from_jet(4, params.window, move |t, n| frame_jet(eta, t, n));
    let (w2, w3) = (params.omega2, params.omega3);
    let h = TimeDepOperator::from_jet(4, params.window, move |t, n| {
        let lam = qubit_jets(eta, t, n).lambda;
        let up = poly(t, &[w2, 1.0], n);
        let down = poly(t, &[w3, -1.0], n);
        (0..=n)
            .map(|k| crate::ops::diag_real(&[lam[k], -lam[k], up[k], down[k]]))
            .collect()
    })
    .with_role(crate::ops::Role::Hamiltonian);
    Ok((s, h))
}

/// V in the superadiabatic frame, S†(τ)VS(τ) with V = lab couplings plus
/// η₂₃(|2⟩⟨3| + h.c.).
pub fn v_sad_operator(params: &MlzParams) -> Result<TimeDepOperator> {
    params.validate()?;
    let eta = params.eta;
    let v = lab_coupling(params) + plus_hc(&ket_bra(4, 2, 3)) * r(params.eta23);
    Ok(TimeDepOperator::from_jet(4, params.window, move |t, n| {
        let sj = frame_jet(eta, t, n);
        let sd: Vec<Mat> = sj.iter().map(|m| m.adjoint()).collect();
        let vj: Vec<Mat> = (0..=n).map(|k| if k == 0 { v.clone() } else { zeros(4) }).collect();
        jet::mul(&sd, &jet::mul(&vj, &sj))
    })
    .with_role(crate::ops::Role::Hamiltonian))
}

/// Direct S†VS at one τ.
pub fn v_sad_elements(params: &MlzParams, tau: f64) -> Result<OperatorMatrix> {
    OperatorMatrix::hamiltonian(v_sad_operator(params)?.eval(tau))
}

/// Closed-form (V₁₂, V₁₃, V₀₂, V₀₃) for η₁₂ = η₀₃ = η₂₃ = η, as printed.
pub fn appendix_elements(eta: f64, tau: f64) -> [C64; 4] {
    let e = tau.hypot(eta);
    let e2 = e * e;
    let l = (4.0 * e2 * e2 * e2 + eta * eta).sqrt();
    let xp = 2.0 * e * e2 + l;
    let xm = eta * eta / xp;
    let tme = if tau >= 0.0 { -eta * eta / (tau + e) } else { tau - e };
    let tpe = if tau >= 0.0 { tau + e } else { -eta * eta / (tau - e) };
    let nm = (tme * tme + eta * eta).sqrt();
    let np = (tpe * tpe + eta * eta).sqrt();
    let mp = (xp * xp + eta * eta).sqrt();
    let mm = (xm * xm + eta * eta).sqrt();
    let e3 = eta * eta * eta;
    [
        c(eta * eta * tme / (nm * mp), eta * tpe * xp / (np * mp)),
        c(-e3 / (nm * mp), -eta * eta * xp / (np * mp)),
        c(-eta * eta * tme / (nm * mm), eta * tpe * xm / (np * mm)),
        c(e3 / (nm * mm), -eta * eta * xm / (np * mm)),
    ]
}

/// The closed forms placed in the frame used here: each printed element is
/// the complex conjugate of ⟨j̃|V_SAD|k⟩, with the |1̃⟩ column sign flipped.
pub fn appendix_v_sad(params: &MlzParams, tau: f64) -> Result<OperatorMatrix> {
    params.validate()?;
    if !params.equal_couplings() {
        return Err(Error::Precondition("closed forms need eta12 = eta03 = eta23 = eta".into()));
    }
    let [v12, v13, v02, v03] = appendix_elements(params.eta, tau);
    let m = ket_bra(4, 1, 2) * (-v12.conj())
        + ket_bra(4, 1, 3) * (-v13.conj())
        + ket_bra(4, 0, 2) * v02.conj()
        + ket_bra(4, 0, 3) * v03.conj()
        + ket_bra(4, 2, 3) * r(params.eta23);
    OperatorMatrix::hamiltonian(plus_hc(&m))
}

fn keep_part(m: &Mat) -> Mat {
    let mut p = zeros(4);
    p[(1, 2)] = r(m[(1, 2)].re);
    p[(1, 3)] = r(m[(1, 3)].re);
    p[(0, 2)] = c(0.0, m[(0, 2)].im);
    p[(0, 3)] = c(0.0, m[(0, 3)].im);
    plus_hc(&p)
}

/// V_part: Re of the |1̃⟩ row and i·Im of the |0̃⟩ row of QV_SAD, plus h.c.
pub fn v_part(params: &MlzParams) -> Result<TimeDepOperator> {
    let v = v_sad_operator(params)?;
    Ok(TimeDepOperator::from_jet(4, params.window, move |t, n| v.derivs(t, n).iter().map(keep_part).collect()).with_role(crate::ops::Role::Hamiltonian))
}

/// Superadiabatic-frame problem H₀,SAD + V_SAD; requires W_SATD installed in
/// the lab frame.
pub fn sad_problem(params: &MlzParams) -> Result<LeakageProblem> {
    let (_, h0) = superadiabatic_frame(params)?;
    let v = v_sad_operator(params)?;
    let not = from_rows(&[&[r(0.0), r(1.0)], &[r(1.0), r(0.0)]]);
    LeakageProblem::new(partition(), h0, v, 1.0, params.window, not)
}

/// W₁ = ∂_τV_part + i[H₀,SAD, V_part] − QV_SAD and W₂ from the standard
/// second-order rule, both in the superadiabatic frame.
pub fn mlz_generating_correction(params: &MlzParams, tol: f64) -> Result<CorrectionSet> {
    let problem = sad_problem(params)?;
    let w1 = w1_from_generator(&problem, &v_part(params)?);
    let w2 = w2_standard(&problem, &w1, W2Form::Full, tol)?;
    Ok(CorrectionSet::new(FrameTag::Superadiabatic).with(w1, Strategy::Generating, 1).with(w2, Strategy::SecondStandard, 2))
}

/// S X S†: a superadiabatic-frame operator seen in the lab frame.
pub fn to_lab(params: &MlzParams, x: &TimeDepOperator) -> Result<TimeDepOperator> {
    let (s, _) = superadiabatic_frame(params)?;
    Ok(crate::problem::to_original_frame(x, &s))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Protocol {
    Uncorrected,
    Td,
    Satd,
    /// W₁ on top of W_SATD.
    First,
    /// W₁ alone, the qubit-block shortcut left out.
    FirstWithoutSatd,
    /// W_SATD + W₁ + W₂.
    Second,
}

impl Protocol {
    pub const ALL: [Protocol; 6] = [Protocol::Uncorrected, Protocol::Td, Protocol::Satd, Protocol::First, Protocol::FirstWithoutSatd, Protocol::Second];

    pub fn name(&self) -> &'static str {
        match self {
            Protocol::Uncorrected => "none",
            Protocol::Td => "td",
            Protocol::Satd => "satd",
            Protocol::First => "satd_w1",
            Protocol::FirstWithoutSatd => "w1",
            Protocol::Second => "satd_w1w2",
        }
    }
}

/// Lab-frame correction for a protocol.
pub fn protocol_correction(params: &MlzParams, protocol: Protocol, tol: f64) -> Result<Option<TimeDepOperator>> {
    params.validate()?;
    let magnus = |order: usize| -> Result<TimeDepOperator> {
        let set = mlz_generating_correction(params, tol)?;
        let w = if order == 1 { set.order(1, 4, params.window) } else { set.total(4, params.window) };
        to_lab(params, &w)
    };
    Ok(match protocol {
        Protocol::Uncorrected => None,
        Protocol::Td => Some(td_operator(params)),
        Protocol::Satd => Some(satd_operator(params)),
        Protocol::First => Some(satd_operator(params).add(&magnus(1)?)),
        Protocol::FirstWithoutSatd => Some(magnus(1)?),
        Protocol::Second => Some(satd_operator(params).add(&magnus(2)?)),
    })
}

/// 1 − |⟨1|U(τ_f, τ_i)|0⟩|² under H_mc plus an optional lab correction.
pub fn transfer_infidelity(params: &MlzParams, extra: Option<&TimeDepOperator>, tol: f64) -> Result<f64> {
    params.validate()?;
    let mut h = lab_hamiltonian(params);
    if let Some(w) = extra {
        h = h.add(w);
    }
    let mut psi0 = vec![r(0.0); 4];
    psi0[0] = r(1.0);
    let psi = propagate_state(&h, params.window, &psi0, tol)?;
    Ok((1.0 - psi[1].norm_sqr()).clamp(0.0, 1.0))
}

pub fn protocol_infidelity(params: &MlzParams, protocol: Protocol, tol: f64) -> Result<f64> {
    let w = protocol_correction(params, protocol, tol)?;
    transfer_infidelity(params, w.as_ref(), tol)
}

/// |⟨1|g(τ)⟩|² for the instantaneous ground state g of H_mc(τ).
pub fn ground_state_weight(params: &MlzParams, tau: f64) -> f64 {
    let (vals, vecs) = eigh(&lab_hamiltonian(params).eval(tau));
    let k = (0..vals.len()).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap_or(0);
    vecs[(1, k)].norm_sqr()
}

/// Adiabatic ground state of −τσz + ησx as amplitudes on (|0⟩, |1⟩).
pub fn qubit_ground_state(eta: f64, tau: f64) -> [f64; 2] {
    let e = tau.hypot(eta);
    let shift = if tau > 0.0 { tau + e } else { eta * eta / (e - tau) };
    let norm = eta.hypot(shift);
    [eta / norm, -shift / norm]
}

/// Probability that the bare two-level sweep prepared in its adiabatic
/// ground state at τ_i ends in the adiabatic ground state at τ_f.
pub fn lz_transfer_probability(eta: f64, window: (f64, f64), tol: f64) -> Result<f64> {
    let p = MlzParams::qubit_only(eta).with_window(window);
    p.validate()?;
    let g0 = qubit_ground_state(eta, window.0);
    let psi0 = [r(g0[0]), r(g0[1]), r(0.0), r(0.0)];
    let psi = propagate_state(&lab_hamiltonian(&p), window, &psi0, tol)?;
    let g1 = qubit_ground_state(eta, window.1);
    Ok((psi[0] * g1[0] + psi[1] * g1[1]).norm_sqr().clamp(0.0, 1.0))
}

/// Asymptotic adiabatic-transfer probability 1 − e^{−πη²}.
pub fn lz_asymptotic(eta: f64) -> f64 {
    1.0 - (-std::f64::consts::PI * eta * eta).exp()
}

/// max over a uniform grid of the second central difference of every
/// real and imaginary entry, in units of the grid spacing squared.
pub fn max_second_difference(op: &TimeDepOperator, samples: usize) -> f64 {
    let (ti, tf) = op.window();
    let grid = uniform_grid(ti, tf, samples);
    let h = grid[1] - grid[0];
    let vals: Vec<Mat> = grid.iter().map(|&t| op.eval(t)).collect();
    let mut worst: f64 = 0.0;
    for k in 1..vals.len() - 1 {
        let d = (&vals[k + 1] - &vals[k] * r(2.0) + &vals[k - 1]) * r(1.0 / (h * h));
        for z in d.iter() {
            worst = worst.max(z.re.abs()).max(z.im.abs());
        }
    }
    worst
}
