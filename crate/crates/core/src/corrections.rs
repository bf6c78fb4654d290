//! Synthesis of the first- and second-order correction Hamiltonians W₁, W₂
//! and handling of experimentally constrained controls.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fidelity::avg_fidelity_from_generator;
use crate::jet;
use crate::ode::{self, OdeOptions};
use crate::ops::{c, comm, eye, hermitian_defect, max_abs, r, read_flat, write_flat, zeros, Mat, I, C64};
use crate::partition::q_apply;
use crate::problem::LeakageProblem;
use crate::propagator::{PropagationResult, QUAD_TOL};
use crate::quad;
use crate::timedep::{uniform_grid, TimeDepOperator};

/// Relative threshold below which two energies count as degenerate.
pub const GAP_TOL: f64 = 1e-9;
/// Boundary test for the derivative-based control: ‖QV(t_i)‖, ‖QV(t_f)‖
/// must not exceed this fraction of max_t ‖QV(t)‖.
pub const BOUNDARY_REL: f64 = 1e-5;
/// r(t_f) must vanish to this accuracy (relative to max_t ‖r‖, floor 1).
pub const GENERATOR_BOUNDARY_TOL: f64 = 1e-8;
pub const ALPHA_TOL: f64 = 1e-5;
const SAMPLES: usize = 65;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strategy {
    Derivative,
    Generating,
    SecondStandard,
    SecondAverage,
    OptimalGamma,
    TruncatedVariational,
    TruncatedIterative,
    Diagonal,
    Reference,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FrameTag {
    Lab,
    Adiabatic,
    Superadiabatic,
}

#[derive(Debug, Clone)]
pub struct CorrectionTerm {
    pub op: TimeDepOperator,
    pub strategy: Strategy,
    pub order: usize,
}

/// Ordered correction terms living in one frame.
#[derive(Debug, Clone)]
pub struct CorrectionSet {
    pub frame: FrameTag,
    pub terms: Vec<CorrectionTerm>,
}

impl CorrectionSet {
    pub fn new(frame: FrameTag) -> Self {
        Self { frame, terms: Vec::new() }
    }

    pub fn with(mut self, op: TimeDepOperator, strategy: Strategy, order: usize) -> Self {
        self.terms.push(CorrectionTerm { op, strategy, order });
        self
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    /// Sum of all terms (zero operator when empty).
    pub fn total(&self, dim: usize, window: (f64, f64)) -> TimeDepOperator {
        self.terms.iter().fold(TimeDepOperator::zero(dim, window), |acc, t| acc.add(&t.op.on_window(window)))
    }

    /// Sum of the terms of a given order.
    pub fn order(&self, k: usize, dim: usize, window: (f64, f64)) -> TimeDepOperator {
        self.terms
            .iter()
            .filter(|t| t.order == k)
            .fold(TimeDepOperator::zero(dim, window), |acc, t| acc.add(&t.op.on_window(window)))
    }

    /// Largest Hermiticity defect of any term over `n` samples.
    pub fn hermitian_defect(&self, n: usize) -> f64 {
        self.terms.iter().map(|t| t.op.hermitian_defect(n).1).fold(0.0, f64::max)
    }
}

/// Implementable controls: the span of a set of Hermitian channel matrices
/// (orthonormalized under Tr A†B), optionally expressed in another frame.
/// With a frame S(t) the channels refer to S X S†, so an operator X in the
/// working frame is implementable when S X S† lies in the span.
#[derive(Clone)]
pub struct Mask {
    dim: usize,
    channels: Vec<Mat>,
    frame: Option<TimeDepOperator>,
}

impl std::fmt::Debug for Mask {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Mask").field("dim", &self.dim).field("channels", &self.channels.len()).field("framed", &self.frame.is_some()).finish()
    }
}

impl Mask {
    pub fn empty(dim: usize) -> Self {
        Self { dim, channels: Vec::new(), frame: None }
    }

    pub fn full(dim: usize) -> Self {
        let all = vec![true; dim * dim];
        Self::from_bools(dim, &all).expect("full mask is symmetric")
    }

    /// Per-element booleans in row-major order; must be symmetric.
    pub fn from_bools(dim: usize, allowed: &[bool]) -> Result<Self> {
        if allowed.len() != dim * dim {
            return Err(Error::Dimension { expected: dim * dim, found: allowed.len() });
        }
        for i in 0..dim {
            for j in 0..dim {
                if allowed[i * dim + j] != allowed[j * dim + i] {
                    return Err(Error::AsymmetricMask { i, j });
                }
            }
        }
        let mut m = Self::empty(dim);
        for i in 0..dim {
            for j in i..dim {
                if allowed[i * dim + j] {
                    m.add_element(i, j);
                }
            }
        }
        Ok(m)
    }

    /// Allow both quadratures of the listed elements (and their transposes).
    pub fn from_elements(dim: usize, elements: &[(usize, usize)]) -> Self {
        let mut m = Self::empty(dim);
        for &(i, j) in elements {
            m.add_element(i.min(j), i.max(j));
        }
        m
    }

    fn add_element(&mut self, i: usize, j: usize) {
        let dim = self.dim;
        let e = |a, b| crate::ops::ket_bra(dim, a, b);
        if i == j {
            self.add_channel(e(i, i));
        } else {
            self.add_channel(e(i, j) + e(j, i));
            self.add_channel((e(i, j) - e(j, i)) * I);
        }
    }

    /// Add a Hermitian channel; components already in the span are ignored.
    pub fn add_channel(&mut self, g: Mat) {
        let mut g = (&g + g.adjoint()) * r(0.5);
        for h in &self.channels {
            let p = inner(h, &g);
            g -= h * r(p);
        }
        let n = inner(&g, &g).sqrt();
        if n > 1e-12 {
            self.channels.push(g * r(1.0 / n));
        }
    }

    pub fn with_channel(mut self, g: Mat) -> Self {
        self.add_channel(g);
        self
    }

    /// Allow a diagonal control with a fixed pattern, e.g. a detuning.
    pub fn with_diagonal_pattern(self, pattern: &[f64]) -> Self {
        self.with_channel(crate::ops::diag_real(pattern))
    }

    pub fn in_frame(mut self, s: TimeDepOperator) -> Self {
        self.frame = Some(s);
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    /// Orthogonal projection onto the implementable span (no frame).
    pub fn project_static(&self, x: &Mat) -> Mat {
        let herm = (x + x.adjoint()) * r(0.5);
        let anti = (x - x.adjoint()) * r(0.5);
        let mut out = zeros(self.dim);
        for g in &self.channels {
            out += g * r(inner(g, &herm));
            out += g * c(0.0, inner(g, &(&anti * c(0.0, -1.0))));
        }
        out
    }

    /// Implementable part of x at time t.
    pub fn project(&self, x: &Mat, t: f64) -> Mat {
        match &self.frame {
            None => self.project_static(x),
            Some(s) => {
                let st = s.eval(t);
                st.adjoint() * self.project_static(&(&st * x * st.adjoint())) * st
            }
        }
    }

    /// Elements of the channel span's complement that carry weight in x.
    pub fn forbidden_elements(&self, x: &Mat, tol: f64) -> Vec<(usize, usize)> {
        let rest = x - self.project_static(x);
        let mut out = Vec::new();
        for i in 0..self.dim {
            for j in i..self.dim {
                if rest[(i, j)].norm() > tol {
                    out.push((i, j));
                }
            }
        }
        out
    }
}

fn inner(a: &Mat, b: &Mat) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x.conj() * y).re).sum()
}

/// Exact decomposition W = ctrl + err with ctrl implementable.
#[derive(Debug, Clone)]
pub struct TruncationSplit {
    pub ctrl: TimeDepOperator,
    pub err: TimeDepOperator,
    pub mask: Mask,
}

pub fn split_controls(w: &TimeDepOperator, mask: &Mask) -> Result<TruncationSplit> {
    if mask.dim() != w.dim() {
        return Err(Error::Dimension { expected: w.dim(), found: mask.dim() });
    }
    let ctrl = if mask.frame.is_none() {
        let m = mask.clone();
        w.map_linear(move |x| m.project_static(x))
    } else {
        let (m, w1) = (mask.clone(), w.clone());
        TimeDepOperator::new(w.dim(), w.window(), move |t| m.project(&w1.eval(t), t))
    };
    let err = w.sub(&ctrl);
    Ok(TruncationSplit { ctrl: ctrl.with_role(w.role()), err: err.with_role(w.role()), mask: mask.clone() })
}

/// Diagonal of H₀ used as the gap energies.
fn energy_jets(h0: &TimeDepOperator, t: f64, n: usize) -> Vec<Vec<f64>> {
    let d = h0.derivs(t, n);
    (0..h0.dim()).map(|a| d.iter().map(|m| m[(a, a)].re).collect()).collect()
}

fn gapped(ea: f64, eb: f64, scale: f64) -> bool {
    (ea - eb).abs() > GAP_TOL * (1.0 + scale)
}

/// K(X)_ab = X_ab / (i(E_a − E_b)), zero on degenerate pairs.
pub fn resolvent(x: &Mat, energies: &[f64]) -> Mat {
    let scale = energies.iter().fold(0.0_f64, |m, e| m.max(e.abs()));
    Mat::from_fn(x.nrows(), x.ncols(), |a, b| {
        if gapped(energies[a], energies[b], scale) {
            x[(a, b)] / c(0.0, energies[a] - energies[b])
        } else {
            r(0.0)
        }
    })
}

fn resolvent_jet(x: &[Mat], e: &[Vec<f64>]) -> Vec<Mat> {
    let n = x[0].nrows();
    let m = x.len();
    let scale = e.iter().fold(0.0_f64, |s, v| s.max(v[0].abs()));
    let mut out = vec![zeros(n); m];
    for a in 0..n {
        for b in 0..n {
            if !gapped(e[a][0], e[b][0], scale) {
                continue;
            }
            let g: Vec<f64> = (0..m).map(|k| e[a][k] - e[b][k]).collect();
            // 1/(i g) = −i/g
            let rho = jet::recip(&g);
            for j in 0..m {
                let mut acc = C64::new(0.0, 0.0);
                for k in 0..=j {
                    acc += x[j - k][(a, b)] * binom(j, k) * rho[k];
                }
                out[j][(a, b)] = acc * c(0.0, -1.0);
            }
        }
    }
    out
}

fn binom(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Z(t) = K_t X(t) with K built from the instantaneous diagonal of H₀.
pub fn resolvent_generator(h0: &TimeDepOperator, x: &TimeDepOperator) -> TimeDepOperator {
    let (h0, x) = (h0.clone(), x.clone());
    TimeDepOperator::from_jet(x.dim(), x.window(), move |t, n| resolvent_jet(&x.derivs(t, n), &energy_jets(&h0, t, n)))
}

/// W₁ = ∂ₜZ + i[H₀, Z] − εQV for a Hermitian Z vanishing at both window ends.
/// The interaction-picture first-order term is then Ω₁(t) = −i(ℓ₀(t)Z(t) − Z(t_i)).
pub fn w1_from_generator(problem: &LeakageProblem, z: &TimeDepOperator) -> TimeDepOperator {
    let (h0, v, z) = (problem.h0.clone(), problem.v.clone(), z.clone());
    let (eps, q) = (problem.epsilon, problem.n_comp());
    TimeDepOperator::from_jet(problem.dim(), problem.window, move |t, n| {
        let zj = z.derivs(t, n + 1);
        let hj = h0.derivs(t, n);
        let vj = v.derivs(t, n);
        let cm = jet::comm(&hj, &zj[..=n]);
        (0..=n).map(|k| &zj[k + 1] + &cm[k] * I - q_apply(&vj[k], q) * r(eps)).collect()
    })
    .with_role(crate::ops::Role::Hamiltonian)
}

/// How the derivative-based control is realized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum W1Realization {
    /// Instantaneous resolvent: Z = K_t(εQV), local in time.
    #[default]
    Local,
    /// ε ℓ₀†(t) 𝓛₀(t) ∂ₜQV(t) with 𝓛₀(t) = ∫_{t_i}^t ℓ₀.
    Literal,
}

/// max_t ‖QV(t)‖ over samples and the boundary values.
fn boundary_check(problem: &LeakageProblem) -> Result<()> {
    let q = problem.n_comp();
    let (ti, tf) = problem.window;
    let peak = uniform_grid(ti, tf, SAMPLES * 4).into_iter().map(|t| max_abs(&q_apply(&problem.v.eval(t), q))).fold(0.0, f64::max);
    let tol = BOUNDARY_REL * peak.max(f64::MIN_POSITIVE);
    for t in [ti, tf] {
        let norm = max_abs(&q_apply(&problem.v.eval(t), q));
        if norm > tol && peak > 0.0 {
            return Err(Error::Boundary { t, norm, tol });
        }
    }
    Ok(())
}

/// Derivative-based first-order control; refuses when QV does not vanish at
/// the window ends.
pub fn w1_derivative(problem: &LeakageProblem, u0: &PropagationResult, realization: W1Realization) -> Result<TimeDepOperator> {
    boundary_check(problem)?;
    match realization {
        W1Realization::Local => {
            let q = problem.n_comp();
            let src = problem.v.map_linear(move |m| q_apply(m, q)).scale(problem.epsilon);
            let z = resolvent_generator(&problem.h0, &src);
            Ok(w1_from_generator(problem, &z))
        }
        W1Realization::Literal => w1_literal(problem, u0),
    }
}

/// 𝓛₀(t) as N² basis images co-integrated with one dense output.
#[derive(Clone)]
pub struct L0Superop {
    dim: usize,
    sol: Arc<ode::DenseSolution>,
}

impl L0Superop {
    pub fn new(u0: &PropagationResult, tol: f64) -> Result<Self> {
        let n = u0.dim();
        let n2 = n * n;
        let (ti, tf) = u0.window();
        let rhs = |t: f64, _y: &[C64], dy: &mut [C64]| {
            let u = u0.u(t);
            let ud = u.adjoint();
            for a in 0..n {
                for b in 0..n {
                    let img = ud.column(a) * u.row(b);
                    write_flat(&img, &mut dy[(a * n + b) * n2..(a * n + b + 1) * n2]);
                }
            }
        };
        let y0 = vec![C64::new(0.0, 0.0); n2 * n2];
        let h_max = (tf - ti).abs() / 256.0;
        let sol = ode::solve(rhs, ti, tf, &y0, OdeOptions::new(tol).h_max(h_max))?;
        Ok(Self { dim: n, sol: Arc::new(sol) })
    }

    /// 𝓛₀(t) X.
    pub fn apply(&self, x: &Mat, t: f64) -> Mat {
        let n = self.dim;
        let n2 = n * n;
        let y = self.sol.eval(t);
        let mut out = zeros(n);
        for a in 0..n {
            for b in 0..n {
                if x[(a, b)] != C64::new(0.0, 0.0) {
                    out += read_flat(&y[(a * n + b) * n2..(a * n + b + 1) * n2], n) * x[(a, b)];
                }
            }
        }
        out
    }
}

fn w1_literal(problem: &LeakageProblem, u0: &PropagationResult) -> Result<TimeDepOperator> {
    let l0 = L0Superop::new(u0, u0.tol().max(1e-12))?;
    let (v, u0, q, eps) = (problem.v.clone(), u0.clone(), problem.n_comp(), problem.epsilon);
    Ok(TimeDepOperator::new(problem.dim(), problem.window, move |t| {
        let dv = q_apply(&v.deriv(t), q);
        let m = l0.apply(&dv, t) * r(eps);
        let w = u0.from_interaction(&m, t);
        (&w + w.adjoint()) * r(0.5)
    })
    .with_role(crate::ops::Role::Hamiltonian))
}

/// W₁ = iℓ₀†(t) ∂ₜQr(t) − εQV(t) for an anti-Hermitian target r with
/// r(t_f) = 0; the resulting Ω₁(t) equals Q(r(t) − r(t_i)).
pub fn w1_generating(problem: &LeakageProblem, u0: &PropagationResult, r_target: &TimeDepOperator) -> Result<TimeDepOperator> {
    let (ti, tf) = problem.window;
    let mut peak: f64 = 0.0;
    for t in uniform_grid(ti, tf, SAMPLES) {
        let m = r_target.eval(t);
        peak = peak.max(max_abs(&m));
        let d = crate::ops::antihermitian_defect(&m);
        if d > 1e-10 * (1.0 + max_abs(&m)) {
            return Err(Error::Role { role: crate::ops::Role::Magnus, defect: d, tol: 1e-10 });
        }
    }
    let norm = max_abs(&r_target.eval(tf));
    if norm > GENERATOR_BOUNDARY_TOL * peak.max(1.0) {
        return Err(Error::GeneratorBoundary { norm });
    }
    let (v, u0, rt, q, eps) = (problem.v.clone(), u0.clone(), r_target.clone(), problem.n_comp(), problem.epsilon);
    Ok(TimeDepOperator::new(problem.dim(), problem.window, move |t| {
        let dr = q_apply(&rt.deriv(t), q);
        let w = u0.from_interaction(&dr, t) * I - q_apply(&v.eval(t), q) * r(eps);
        (&w + w.adjoint()) * r(0.5)
    })
    .with_role(crate::ops::Role::Hamiltonian))
}

/// Which part of −½[B, Y] is kept as the second-order control.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum W2Form {
    /// The full commutator; also removes the computational-block part of Ω₂.
    #[default]
    Full,
    /// Only its Q-projection.
    Q,
}

/// Y(t) = U₀(t)Ω₁(t)U₀†(t) from ∂ₜY = −i[H₀, Y] − iB, Y(t_i) = 0, with
/// B = εV + W₁.
fn schrodinger_omega1(problem: &LeakageProblem, w1: &TimeDepOperator, tol: f64) -> Result<Arc<ode::DenseSolution>> {
    let n = problem.dim();
    let b = problem.perturbation().add(w1);
    let h0 = problem.h0.clone();
    let rhs = |t: f64, y: &[C64], dy: &mut [C64]| {
        let ym = read_flat(y, n);
        let d = (comm(&h0.eval(t), &ym) + b.eval(t)) * c(0.0, -1.0);
        write_flat(&d, dy);
    };
    let (ti, tf) = problem.window;
    let sol = ode::solve(rhs, ti, tf, &vec![C64::new(0.0, 0.0); n * n], OdeOptions::new(tol).h_max((tf - ti).abs() / 64.0))?;
    Ok(Arc::new(sol))
}

/// W₂(t) = −iℓ₀†(t)∂ₜQΩ₂(t) evaluated in the Schrödinger frame as
/// −½[B(t), Y(t)] (optionally Q-projected).
pub fn w2_standard(problem: &LeakageProblem, w1: &TimeDepOperator, form: W2Form, tol: f64) -> Result<TimeDepOperator> {
    let n = problem.dim();
    let q = problem.n_comp();
    let y = schrodinger_omega1(problem, w1, tol)?;
    let b = problem.perturbation().add(w1);
    Ok(TimeDepOperator::new(n, problem.window, move |t| {
        let ym = read_flat(&y.eval(t), n);
        let w = comm(&b.eval(t), &ym) * r(-0.5);
        let w = (&w + w.adjoint()) * r(0.5);
        match form {
            W2Form::Full => w,
            W2Form::Q => q_apply(&w, q),
        }
    })
    .with_role(crate::ops::Role::Hamiltonian))
}

/// Ω₁(t_f) and Ω₂(t_f) of the interaction-picture propagator generated by
/// εV + extra, computed by co-integrating U₀, Y and Z₂ = U₀Ω₂U₀†.
pub fn omega12_final(problem: &LeakageProblem, extra: &TimeDepOperator, tol: f64) -> Result<(Mat, Mat)> {
    let n = problem.dim();
    let n2 = n * n;
    let b = problem.perturbation().add(extra);
    let h0 = problem.h0.clone();
    let rhs = |t: f64, y: &[C64], dy: &mut [C64]| {
        let h = h0.eval(t);
        let bt = b.eval(t);
        let u = read_flat(&y[..n2], n);
        let ym = read_flat(&y[n2..2 * n2], n);
        let z2 = read_flat(&y[2 * n2..], n);
        write_flat(&(&h * &u * c(0.0, -1.0)), &mut dy[..n2]);
        write_flat(&((comm(&h, &ym) + &bt) * c(0.0, -1.0)), &mut dy[n2..2 * n2]);
        write_flat(&(comm(&h, &z2) * c(0.0, -1.0) + comm(&bt, &ym) * c(0.0, -0.5)), &mut dy[2 * n2..]);
    };
    let mut y0 = vec![C64::new(0.0, 0.0); 3 * n2];
    for k in 0..n {
        y0[k * n + k] = C64::new(1.0, 0.0);
    }
    let (ti, tf) = problem.window;
    let sol = ode::solve(rhs, ti, tf, &y0, OdeOptions::new(tol).final_only().h_max((tf - ti).abs() / 64.0))?;
    let yf = sol.y_final();
    let u = read_flat(&yf[..n2], n);
    let o1 = u.adjoint() * read_flat(&yf[n2..2 * n2], n) * &u;
    let o2 = u.adjoint() * read_flat(&yf[2 * n2..], n) * &u;
    Ok((o1, o2))
}

/// Second-order control whose interaction-picture integral is −iQΩ₂(t_f),
/// realized as a constant in the interaction picture.
pub fn w2_average(problem: &LeakageProblem, u0: &PropagationResult, w1: &TimeDepOperator, tol: f64) -> Result<TimeDepOperator> {
    let (_, o2) = omega12_final(problem, w1, tol)?;
    let (ti, tf) = problem.window;
    let cst = q_apply(&o2, problem.n_comp()) * c(0.0, -1.0 / (tf - ti));
    let cst = (&cst + cst.adjoint()) * r(0.5);
    let u0 = u0.clone();
    Ok(TimeDepOperator::new(problem.dim(), problem.window, move |t| u0.from_interaction(&cst, t)).with_role(crate::ops::Role::Hamiltonian))
}

/// W₂,opt = −γ·W₂; γ = −1 is the standard choice, γ = −2/3 also cancels
/// the leading third-order term. Requires QV = V.
pub fn w2_optimal_gamma(problem: &LeakageProblem, w1: &TimeDepOperator, gamma: f64, form: W2Form, tol: f64) -> Result<TimeDepOperator> {
    let q = problem.n_comp();
    let (ti, tf) = problem.window;
    for t in uniform_grid(ti, tf, SAMPLES) {
        let v = problem.v.eval(t);
        let d = max_abs(&(&v - q_apply(&v, q)));
        if d > 1e-12 * (1.0 + max_abs(&v)) {
            return Err(Error::Precondition(format!("QV != V at t = {t} (leakage-block coupling {d:.3e})")));
        }
    }
    Ok(w2_standard(problem, w1, form, tol)?.scale(-gamma))
}

pub const DEFAULT_GAMMA: f64 = -2.0 / 3.0;

/// −i∫ℓ₀(εQV + Q·extra) over the window.
pub fn first_order_generator(problem: &LeakageProblem, u0: &PropagationResult, extra: &TimeDepOperator) -> Result<Mat> {
    let q = problem.n_comp();
    let b = problem.perturbation().add(extra);
    let (ti, tf) = problem.window;
    let panels = u0.grid().len().clamp(16, 4096);
    let m = quad::integrate_mat_panels(|t| u0.to_interaction(&q_apply(&b.eval(t), q), t), ti, tf, QUAD_TOL, panels)?;
    Ok(m * c(0.0, -1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VariationalAlpha {
    pub alpha: f64,
    pub fbar: f64,
    pub interior: bool,
}

/// Maximize F̄(α) for the truncated control α·ctrl (the unimplementable
/// remainder dropped) by a grid scan refined with golden-section search.
pub fn variational_alpha(problem: &LeakageProblem, u0: &PropagationResult, split: &TruncationSplit, bracket: (f64, f64)) -> Result<VariationalAlpha> {
    let (lo, hi) = bracket;
    if !(0.0 <= lo && lo < hi && hi <= 4.0) {
        return Err(Error::Param(format!("bracket [{lo}, {hi}] not inside [0, 4]")));
    }
    let a = first_order_generator(problem, u0, &TimeDepOperator::zero(problem.dim(), problem.window))?;
    let b = first_order_generator(problem, u0, &split.ctrl)? - &a;
    let p = problem.partition.clone();
    let f = |al: f64| avg_fidelity_from_generator(&(&a + &b * r(al)), &p);
    Ok(maximize(f, lo, hi))
}

/// Golden-section maximization after a coarse scan.
pub fn maximize<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64) -> VariationalAlpha {
    let n = 64;
    let xs: Vec<f64> = uniform_grid(lo, hi, n + 1);
    let k = (0..=n).max_by(|&i, &j| f(xs[i]).total_cmp(&f(xs[j]))).unwrap();
    let (mut a, mut b) = (xs[k.saturating_sub(1)], xs[(k + 1).min(n)]);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while b - a > ALPHA_TOL * 0.5 {
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = f(x2);
        }
    }
    let mut alpha = 0.5 * (a + b);
    let mut fbar = f(alpha);
    for edge in [lo, hi] {
        let fe = f(edge);
        if fe > fbar {
            alpha = edge;
            fbar = fe;
        }
    }
    let interior = alpha - lo > ALPHA_TOL && hi - alpha > ALPHA_TOL;
    VariationalAlpha { alpha, fbar, interior }
}

/// Output of the iterated integration by parts.
#[derive(Debug, Clone)]
pub struct IbpResult {
    /// Σ_k X_k, the implementable replacement for the dropped remainder.
    pub x: TimeDepOperator,
    /// Unimplementable remainder left after the last iteration.
    pub residual: TimeDepOperator,
}

/// Iteratively replace the unimplementable part of a first-order control by
/// implementable terms with the same first-order integral.
///
/// With H_s = diag H₀, K = (i ad_{H_s})⁺ and H_d = H₀ − H_s, every gapped
/// operator T obeys ∫ℓ₀T = −∫ℓ₀D(T) up to boundary terms, where
/// D(T) = i[H_d, KT] + ∂ₜ(KT). Splitting D(T_k) = c_k + e_k by the mask gives
/// X_{k+1} = −c_k and T_{k+1} = −e_k, starting from T₀ = split.err.
pub fn iterative_ibp(problem: &LeakageProblem, split: &TruncationSplit, depth: usize) -> Result<IbpResult> {
    let n = problem.dim();
    let (ti, tf) = problem.window;
    for t in uniform_grid(ti, tf, SAMPLES) {
        let e = split.err.eval(t);
        let en: Vec<f64> = (0..n).map(|a| problem.h0.eval(t)[(a, a)].re).collect();
        let scale = en.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let mut bad: f64 = 0.0;
        for a in 0..n {
            for b in 0..n {
                if !gapped(en[a], en[b], scale) {
                    bad = bad.max(e[(a, b)].norm());
                }
            }
        }
        if bad > 1e-10 * (1.0 + max_abs(&e)) {
            return Err(Error::Closure { residual: bad });
        }
    }
    for t in [ti, tf] {
        let e = max_abs(&split.err.eval(t));
        if e > 1e-6 {
            return Err(Error::Closure { residual: e });
        }
    }
    let make = |want_residual: bool| {
        let (h0, err, mask) = (problem.h0.clone(), split.err.clone(), split.mask.clone());
        TimeDepOperator::from_jet(n, problem.window, move |t, m| {
            let (x, res) = ibp_jets(&h0, &err, &mask, depth, t, m);
            if want_residual {
                res
            } else {
                x
            }
        })
    };
    Ok(IbpResult { x: make(false).with_role(crate::ops::Role::Hamiltonian), residual: make(true) })
}

fn ibp_jets(h0: &TimeDepOperator, err: &TimeDepOperator, mask: &Mask, depth: usize, t: f64, m: usize) -> (Vec<Mat>, Vec<Mat>) {
    let n = h0.dim();
    let top = depth + m;
    let hj = h0.derivs(t, top);
    let ej = energy_jets(h0, t, top);
    let hd: Vec<Mat> = hj.iter().map(|h| h - crate::ops::diag_part(h)).collect();
    let mut tj = err.derivs(t, top);
    let mut x = vec![zeros(n); m + 1];
    for _ in 0..depth {
        let len = tj.len();
        let kt = resolvent_jet(&tj, &ej[..].iter().map(|v| v[..len].to_vec()).collect::<Vec<_>>());
        let cm = jet::comm(&hd[..len - 1], &kt[..len - 1]);
        let d: Vec<Mat> = (0..len - 1).map(|k| &cm[k] * I + &kt[k + 1]).collect();
        let ctrl: Vec<Mat> = d.iter().map(|dk| mask.project(dk, t)).collect();
        for k in 0..=m {
            x[k] -= &ctrl[k];
        }
        tj = d.iter().zip(&ctrl).map(|(dk, ck)| ck - dk).collect();
    }
    tj.truncate(m + 1);
    (x, tj)
}

/// Diagonal control cancelling the computational-block first-order phase
/// error of εV + w_ctrl: with F(t) = ∫P_Q(εV + w_ctrl)P_Q (Schrödinger
/// frame), W_diag is the computational diagonal of i[H₀, F], projected onto
/// `pattern` when one is given.
pub fn phase_error_diagonal(problem: &LeakageProblem, w_ctrl: &TimeDepOperator, pattern: Option<&[f64]>, tol: f64) -> Result<TimeDepOperator> {
    let n = problem.dim();
    let q = problem.n_comp();
    if let Some(p) = pattern {
        if p.len() != n {
            return Err(Error::Dimension { expected: n, found: p.len() });
        }
        if p[..q].iter().all(|v| *v == 0.0) {
            return Err(Error::Param("diagonal pattern vanishes on the computational block".into()));
        }
    }
    let src = problem.perturbation().add(w_ctrl);
    let block = move |m: &Mat| Mat::from_fn(n, n, |i, j| if i < q && j < q { m[(i, j)] } else { r(0.0) });
    let x = src.map_linear(block);
    let (ti, tf) = problem.window;
    let xs = x.clone();
    let rhs = |t: f64, _y: &[C64], dy: &mut [C64]| write_flat(&xs.eval(t), dy);
    let f = Arc::new(ode::solve(rhs, ti, tf, &vec![C64::new(0.0, 0.0); n * n], OdeOptions::new(tol).h_max((tf - ti).abs() / 64.0))?);
    let h0 = problem.h0.clone();
    let pat: Option<Vec<f64>> = pattern.map(|p| p.to_vec());
    Ok(TimeDepOperator::from_jet(n, problem.window, move |t, m| {
        let mut fj = vec![read_flat(&f.eval(t), n)];
        if m >= 1 {
            fj.extend(x.derivs(t, m - 1));
        }
        let cm = jet::comm(&h0.derivs(t, m), &fj);
        cm.iter()
            .map(|k| {
                let d: Vec<f64> = (0..q).map(|a| (k[(a, a)] * I).re).collect();
                match &pat {
                    Some(p) => crate::ops::diag_real(p) * r(pattern_fit(&d, p)),
                    None => {
                        let mut full = vec![0.0; n];
                        full[..q].copy_from_slice(&d);
                        crate::ops::diag_real(&full)
                    }
                }
            })
            .collect()
    })
    .with_role(crate::ops::Role::Hamiltonian))
}

/// Least-squares coefficient c with c·p ≈ d over the entries of `d`.
fn pattern_fit(d: &[f64], p: &[f64]) -> f64 {
    let num: f64 = d.iter().zip(p).map(|(x, y)| x * y).sum();
    let den: f64 = d.iter().zip(p).map(|(_, y)| y * y).sum();
    num / den
}

/// Keep only the part of `op` expressible as c(t)·diag(pattern), fitting c
/// on the computational diagonal.
pub fn truncate_to_pattern(op: &TimeDepOperator, pattern: &[f64], n_comp: usize) -> Result<TimeDepOperator> {
    if pattern.len() != op.dim() {
        return Err(Error::Dimension { expected: op.dim(), found: pattern.len() });
    }
    if pattern[..n_comp].iter().all(|v| *v == 0.0) {
        return Err(Error::Param("diagonal pattern vanishes on the computational block".into()));
    }
    let p = pattern.to_vec();
    let unit = crate::ops::diag_real(&p);
    Ok(op.map_linear(move |m| {
        let d: Vec<f64> = (0..n_comp).map(|a| m[(a, a)].re).collect();
        &unit * r(pattern_fit(&d, &p[..n_comp]))
    })
    .with_role(crate::ops::Role::Hamiltonian))
}

/// Largest Hermiticity defect of an operator over `n` samples.
pub fn max_hermitian_defect(op: &TimeDepOperator, n: usize) -> f64 {
    uniform_grid(op.window().0, op.window().1, n).into_iter().map(|t| hermitian_defect(&op.eval(t))).fold(0.0, f64::max)
}

/// Identity helper for callers building masks in a moving frame.
pub fn identity_frame(dim: usize, window: (f64, f64)) -> TimeDepOperator {
    TimeDepOperator::constant(eye(dim), window)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ops::{ket_bra, max_abs_diff, plus_hc};
    use crate::partition::HilbertPartition;
    use crate::propagator::propagate;

    fn toy(eps: f64) -> LeakageProblem {
        let w = (0.0, 10.0);
        let h0 = TimeDepOperator::constant(crate::ops::diag_real(&[0.0, 0.3, 2.0]), w);
        let a = std::f64::consts::PI / 10.0;
        let s = move |t: f64, n: usize| -> Vec<f64> { (0..=n).map(|k| sin2_deriv(a, t, k)).collect() };
        let v = TimeDepOperator::scalar_times(plus_hc(&ket_bra(3, 1, 2)) + plus_hc(&(ket_bra(3, 0, 2) * c(0.0, 0.5))), w, s);
        LeakageProblem::new(HilbertPartition::numbered(3, 2).unwrap(), h0, v, eps, w, eye(2)).unwrap()
    }

    // dᵏ/dtᵏ sin²(a t) = −½ (2a)ᵏ cos(2 a t + kπ/2) for k ≥ 1.
    fn sin2_deriv(a: f64, t: f64, k: usize) -> f64 {
        if k == 0 {
            (a * t).sin().powi(2)
        } else {
            -0.5 * (2.0 * a).powi(k as i32) * (2.0 * a * t + k as f64 * std::f64::consts::FRAC_PI_2).cos()
        }
    }

    #[test]
    fn split_is_exact_partition() {
        let p = toy(0.1);
        let w = p.v.clone();
        let m = Mask::from_elements(3, &[(1, 2)]);
        let s = split_controls(&w, &m).unwrap();
        for t in [1.0, 4.0, 7.5] {
            let sum = s.ctrl.eval(t) + s.err.eval(t);
            assert!(max_abs_diff(&sum, &w.eval(t)) < 1e-15);
            assert_eq!(s.ctrl.eval(t)[(0, 2)], r(0.0));
        }
        let full = split_controls(&w, &Mask::full(3)).unwrap();
        assert!(max_abs(&full.err.eval(3.0)) < 1e-15);
        let none = split_controls(&w, &Mask::empty(3)).unwrap();
        assert_eq!(max_abs(&none.ctrl.eval(3.0)), 0.0);
        let mut bools = vec![false; 9];
        bools[1] = true;
        assert!(matches!(Mask::from_bools(3, &bools), Err(Error::AsymmetricMask { .. })));
    }

    #[test]
    fn derivative_control_cancels_first_order() {
        let p = toy(0.2);
        let u0 = propagate(&p.h0, p.window, 1e-12).unwrap();
        for real in [W1Realization::Local, W1Realization::Literal] {
            let w1 = w1_derivative(&p, &u0, real).unwrap();
            let o1 = first_order_generator(&p, &u0, &w1).unwrap();
            assert!(max_abs(&o1) < 1e-8, "{real:?}: {}", max_abs(&o1));
            assert!(max_hermitian_defect(&w1, 17) < 1e-12);
        }
    }

    #[test]
    fn zero_perturbation_gives_zero_controls() {
        let p = toy(0.0);
        let u0 = propagate(&p.h0, p.window, 1e-12).unwrap();
        let w1 = w1_derivative(&p, &u0, W1Realization::Local).unwrap();
        assert_eq!(max_abs(&w1.eval(3.3)), 0.0);
        let w2 = w2_standard(&p, &w1, W2Form::Full, 1e-10).unwrap();
        assert_eq!(max_abs(&w2.eval(3.3)), 0.0);
    }

    #[test]
    fn generating_with_zero_target_cancels_instantaneously() {
        let p = toy(0.2);
        let u0 = propagate(&p.h0, p.window, 1e-12).unwrap();
        let w1 = w1_generating(&p, &u0, &TimeDepOperator::zero(3, p.window)).unwrap();
        let want = q_apply(&p.v.eval(2.0), 2) * r(-0.2);
        assert!(max_abs_diff(&w1.eval(2.0), &want) < 1e-14);
        let bad = TimeDepOperator::constant(plus_hc(&ket_bra(3, 0, 2)) * I, p.window);
        assert!(matches!(w1_generating(&p, &u0, &bad), Err(Error::GeneratorBoundary { .. })));
    }

    #[test]
    fn boundary_violation_is_refused() {
        let w = (0.0, 1.0);
        let h0 = TimeDepOperator::constant(crate::ops::diag_real(&[0.0, 1.0, 3.0]), w);
        let v = TimeDepOperator::constant(plus_hc(&ket_bra(3, 0, 2)), w);
        let p = LeakageProblem::new(HilbertPartition::numbered(3, 2).unwrap(), h0, v, 0.1, w, eye(2)).unwrap();
        let u0 = propagate(&p.h0, w, 1e-10).unwrap();
        assert!(matches!(w1_derivative(&p, &u0, W1Realization::Local), Err(Error::Boundary { .. })));
    }

    #[test]
    fn w2_average_matches_standard_integral() {
        let p = toy(0.3);
        let u0 = propagate(&p.h0, p.window, 1e-12).unwrap();
        let w1 = w1_derivative(&p, &u0, W1Realization::Local).unwrap();
        let w2s = w2_standard(&p, &w1, W2Form::Q, 1e-12).unwrap();
        let w2a = w2_average(&p, &u0, &w1, 1e-12).unwrap();
        let zero = TimeDepOperator::zero(3, p.window);
        let pz = p.with_epsilon(0.0);
        let is = first_order_generator(&pz, &u0, &w2s).unwrap();
        let ia = first_order_generator(&pz, &u0, &w2a).unwrap();
        assert!(max_abs_diff(&is, &ia) < 1e-7, "{}", max_abs_diff(&is, &ia));
        assert!(max_abs(&first_order_generator(&pz, &u0, &zero).unwrap()) == 0.0);
    }

    #[test]
    fn gamma_minus_one_is_standard() {
        let p = toy(0.3);
        let u0 = propagate(&p.h0, p.window, 1e-12).unwrap();
        let w1 = w1_derivative(&p, &u0, W1Realization::Local).unwrap();
        let a = w2_standard(&p, &w1, W2Form::Full, 1e-11).unwrap();
        let b = w2_optimal_gamma(&p, &w1, -1.0, W2Form::Full, 1e-11).unwrap();
        assert!(max_abs_diff(&a.eval(4.2), &b.eval(4.2)) < 1e-15);
    }

    #[test]
    fn maximize_finds_parabola_peak() {
        let v = maximize(|x| -(x - 0.7).powi(2), 0.0, 2.0);
        assert!((v.alpha - 0.7).abs() < 1e-5 && v.interior);
        let v = maximize(|x| x, 0.0, 2.0);
        assert_eq!(v.alpha, 2.0);
        assert!(!v.interior);
    }
}
