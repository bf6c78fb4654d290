//! Time-ordered exponentials, the interaction-picture map ℓ₀ and its
//! integral 𝓛₀.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::ode::{self, DenseSolution, OdeOptions};
use crate::ops::{hermitian_defect, read_flat, unitarity_defect, Mat, C64};
use crate::quad;
use crate::timedep::{MatFn, TimeDepOperator};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const SWEEP_TOL: f64 = 1e-11;
pub const QUAD_TOL: f64 = 1e-11;

#[derive(Clone)]
enum Source {
    Numeric(Arc<DenseSolution>),
    Analytic(MatFn),
}

/// U(t) on a window, either from numerical integration with dense output or
/// from a closed form.
#[derive(Clone)]
pub struct PropagationResult {
    dim: usize,
    t_i: f64,
    t_f: f64,
    tol: f64,
    src: Source,
}

impl std::fmt::Debug for PropagationResult {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PropagationResult")
            .field("dim", &self.dim)
            .field("window", &(self.t_i, self.t_f))
            .field("tol", &self.tol)
            .field("steps", &self.grid().len())
            .finish()
    }
}

impl PropagationResult {
    /// Wrap a closed-form propagator; `u(t_i)` must be the identity.
    pub fn analytic<F>(dim: usize, window: (f64, f64), u: F) -> Self
    where
        F: Fn(f64) -> Mat + Send + Sync + 'static,
    {
        Self { dim, t_i: window.0, t_f: window.1, tol: 0.0, src: Source::Analytic(Arc::new(u)) }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn window(&self) -> (f64, f64) {
        (self.t_i, self.t_f)
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn u(&self, t: f64) -> Mat {
        match &self.src {
            Source::Numeric(sol) => read_flat(&sol.eval(t), self.dim),
            Source::Analytic(f) => f(t),
        }
    }

    pub fn u_final(&self) -> Mat {
        match &self.src {
            Source::Numeric(sol) => read_flat(sol.y_final(), self.dim),
            Source::Analytic(f) => f(self.t_f),
        }
    }

    /// Stored step boundaries (a uniform 257-point grid for closed forms).
    pub fn grid(&self) -> Vec<f64> {
        match &self.src {
            Source::Numeric(sol) => sol.grid(),
            Source::Analytic(_) => crate::timedep::uniform_grid(self.t_i, self.t_f, 257),
        }
    }

    /// Largest unitarity defect over the stored grid.
    pub fn max_unitarity_defect(&self) -> f64 {
        self.grid().into_iter().map(|t| unitarity_defect(&self.u(t))).fold(0.0, f64::max)
    }

    /// ℓ₀(t) applied to a fixed operator: U†(t) X U(t).
    pub fn to_interaction(&self, x: &Mat, t: f64) -> Mat {
        let u = self.u(t);
        u.adjoint() * x * u
    }

    /// ℓ₀†(t) applied to a fixed operator: U(t) X U†(t).
    pub fn from_interaction(&self, x: &Mat, t: f64) -> Mat {
        let u = self.u(t);
        &u * x * u.adjoint()
    }
}

fn check_tol(tol: f64) -> Result<()> {
    if !(1e-13..=1e-6).contains(&tol) {
        return Err(Error::Param(format!("tolerance {tol:e} outside [1e-13, 1e-6]")));
    }
    Ok(())
}

fn check_hermitian(h: &TimeDepOperator, window: (f64, f64)) -> Result<()> {
    for t in crate::timedep::uniform_grid(window.0, window.1, 17) {
        let d = hermitian_defect(&h.eval(t));
        if d > 1e-10 * (1.0 + crate::ops::max_abs(&h.eval(t))) {
            return Err(Error::NonHermitian { t, defect: d });
        }
    }
    Ok(())
}

fn unitary_rhs(h: &TimeDepOperator, n: usize) -> impl FnMut(f64, &[C64], &mut [C64]) + '_ {
    move |t, y, dy| {
        let hm = h.eval(t);
        for i in 0..n {
            for j in 0..n {
                let mut acc = C64::new(0.0, 0.0);
                for k in 0..n {
                    acc += hm[(i, k)] * y[k * n + j];
                }
                dy[i * n + j] = C64::new(acc.im, -acc.re);
            }
        }
    }
}

/// Solve ∂ₜU = −iH(t)U, U(t_i) = 1 with dense output.
pub fn propagate(h: &TimeDepOperator, window: (f64, f64), tol: f64) -> Result<PropagationResult> {
    check_tol(tol)?;
    check_hermitian(h, window)?;
    let n = h.dim();
    let y0 = identity_flat(n);
    let sol = ode::solve(unitary_rhs(h, n), window.0, window.1, &y0, OdeOptions::new(tol))?;
    Ok(PropagationResult { dim: n, t_i: window.0, t_f: window.1, tol, src: Source::Numeric(Arc::new(sol)) })
}

/// U(t_f) only, without storing dense output.
pub fn propagate_final(h: &TimeDepOperator, window: (f64, f64), tol: f64) -> Result<Mat> {
    check_tol(tol)?;
    let n = h.dim();
    let y0 = identity_flat(n);
    let sol = ode::solve(unitary_rhs(h, n), window.0, window.1, &y0, OdeOptions::new(tol).final_only())?;
    Ok(read_flat(sol.y_final(), n))
}

/// Final state for a single initial vector.
pub fn propagate_state(h: &TimeDepOperator, window: (f64, f64), psi0: &[C64], tol: f64) -> Result<Vec<C64>> {
    check_tol(tol)?;
    let n = h.dim();
    let rhs = |t: f64, y: &[C64], dy: &mut [C64]| {
        let hm = h.eval(t);
        for i in 0..n {
            let mut acc = C64::new(0.0, 0.0);
            for k in 0..n {
                acc += hm[(i, k)] * y[k];
            }
            dy[i] = C64::new(acc.im, -acc.re);
        }
    };
    let sol = ode::solve(rhs, window.0, window.1, psi0, OdeOptions::new(tol).final_only())?;
    Ok(sol.y_final().to_vec())
}

fn identity_flat(n: usize) -> Vec<C64> {
    let mut y = vec![C64::new(0.0, 0.0); n * n];
    for k in 0..n {
        y[k * n + k] = C64::new(1.0, 0.0);
    }
    y
}

fn same_window(a: (f64, f64), b: (f64, f64)) -> bool {
    let scale = 1.0 + a.0.abs().max(a.1.abs());
    (a.0 - b.0).abs() <= 1e-12 * scale && (a.1 - b.1).abs() <= 1e-12 * scale
}

/// t ↦ U₀†(t) op(t) U₀(t).
pub fn interaction_picture(op: &TimeDepOperator, u0: &PropagationResult) -> Result<TimeDepOperator> {
    if !same_window(op.window(), u0.window()) {
        let (a, b) = (op.window(), u0.window());
        return Err(Error::WindowMismatch { a_i: a.0, a_f: a.1, b_i: b.0, b_f: b.1 });
    }
    if op.dim() != u0.dim() {
        return Err(Error::Dimension { expected: u0.dim(), found: op.dim() });
    }
    let (dim, window, role) = (op.dim(), op.window(), op.role());
    let op = op.clone();
    let u0 = u0.clone();
    Ok(TimeDepOperator::new(dim, window, move |t| u0.to_interaction(&op.eval(t), t)).with_role(role))
}

/// Inverse map: t ↦ U₀(t) op(t) U₀†(t).
pub fn schrodinger_picture(op: &TimeDepOperator, u0: &PropagationResult) -> TimeDepOperator {
    let (dim, window, role) = (op.dim(), op.window(), op.role());
    let op = op.clone();
    let u0 = u0.clone();
    TimeDepOperator::new(dim, window, move |t| u0.from_interaction(&op.eval(t), t)).with_role(role)
}

/// 𝓛₀(t)X = ∫_{t_i}^{t} U₀†(t₁) X U₀(t₁) dt₁ for a fixed operator X.
pub fn l0_antiderivative(op_fixed: &Mat, u0: &PropagationResult, t: f64) -> Result<Mat> {
    let (ti, tf) = u0.window();
    let (lo, hi) = (ti.min(tf), ti.max(tf));
    if t < lo - 1e-12 * (1.0 + lo.abs()) || t > hi + 1e-12 * (1.0 + hi.abs()) {
        return Err(Error::OutOfWindow { t, t_i: ti, t_f: tf });
    }
    let panels = u0.grid().len().clamp(8, 4096);
    let frac = ((t - ti) / (tf - ti)).abs();
    let panels = ((panels as f64 * frac).ceil() as usize).max(4);
    quad::integrate_mat_panels(|s| u0.to_interaction(op_fixed, s), ti, t, QUAD_TOL, panels)
}
