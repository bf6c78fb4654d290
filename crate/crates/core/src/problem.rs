//! The leakage problem statement and frame changes.

use crate::error::{Error, Result};
use crate::ops::{hermitian_defect, max_abs, r, unitarity_defect, Mat};
use crate::partition::{cross_part, HilbertPartition};
use crate::propagator::propagate_final;
use crate::timedep::{uniform_grid, TimeDepOperator};

/// H(t) = H₀(t) + εV(t) on a window, with a target gate on the
/// computational block.
#[derive(Debug, Clone)]
pub struct LeakageProblem {
    pub partition: HilbertPartition,
    pub h0: TimeDepOperator,
    pub v: TimeDepOperator,
    pub epsilon: f64,
    pub window: (f64, f64),
    pub target_gate: Mat,
}

const CHECK_POINTS: usize = 33;

impl LeakageProblem {
    pub fn new(
        partition: HilbertPartition,
        h0: TimeDepOperator,
        v: TimeDepOperator,
        epsilon: f64,
        window: (f64, f64),
        target_gate: Mat,
    ) -> Result<Self> {
        let n = partition.n_total();
        for op in [&h0, &v] {
            if op.dim() != n {
                return Err(Error::Dimension { expected: n, found: op.dim() });
            }
        }
        if target_gate.nrows() != partition.n_comp() || target_gate.ncols() != partition.n_comp() {
            return Err(Error::Dimension { expected: partition.n_comp(), found: target_gate.nrows() });
        }
        if unitarity_defect(&target_gate) > 1e-10 {
            return Err(Error::NonUnitary { t: window.1, defect: unitarity_defect(&target_gate) });
        }
        if !(epsilon >= 0.0) {
            return Err(Error::Param(format!("epsilon must be non-negative, got {epsilon}")));
        }
        for t in uniform_grid(window.0, window.1, CHECK_POINTS) {
            let h = h0.eval(t);
            let scale = 1.0 + max_abs(&h);
            let off = max_abs(&cross_part(&h, partition.n_comp()));
            if off > 1e-12 * scale {
                return Err(Error::Precondition(format!("H0 couples computational and leakage blocks at t = {t} ({off:.3e})")));
            }
            let vt = v.eval(t);
            let d = hermitian_defect(&vt);
            if d > 1e-12 * (1.0 + max_abs(&vt)) {
                return Err(Error::NonHermitian { t, defect: d });
            }
        }
        let h0 = h0.on_window(window);
        let v = v.on_window(window);
        Ok(Self { partition, h0, v, epsilon, window, target_gate })
    }

    pub fn dim(&self) -> usize {
        self.partition.n_total()
    }

    pub fn n_comp(&self) -> usize {
        self.partition.n_comp()
    }

    /// εV(t).
    pub fn perturbation(&self) -> TimeDepOperator {
        self.v.scale(self.epsilon)
    }

    /// H₀ + εV.
    pub fn hamiltonian(&self) -> TimeDepOperator {
        self.h0.add(&self.perturbation())
    }

    /// Same problem with V → sV.
    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.epsilon *= s;
        out
    }

    /// U₀†(t_f)U(t_f) for H₀ + εV + extra, projected onto the nearest
    /// unitary.
    pub fn error_propagator(&self, extra: Option<&TimeDepOperator>, tol: f64) -> Result<Mat> {
        let h = match extra {
            Some(w) => self.hamiltonian().add(w),
            None => self.hamiltonian(),
        };
        let u = propagate_final(&h, self.window, tol)?;
        let u0 = propagate_final(&self.h0, self.window, tol)?;
        Ok(crate::ops::polar_unitary(&(u0.adjoint() * u)))
    }

    /// Same problem with a different ε.
    pub fn with_epsilon(&self, epsilon: f64) -> Self {
        let mut out = self.clone();
        out.epsilon = epsilon;
        out
    }
}

/// S†HS − iS†∂ₜS.
pub fn adiabatic_frame(h: &TimeDepOperator, s: &TimeDepOperator) -> Result<TimeDepOperator> {
    for t in uniform_grid(s.window().0, s.window().1, CHECK_POINTS) {
        let d = unitarity_defect(&s.eval(t));
        if d > 1e-10 {
            return Err(Error::NonUnitary { t, defect: d });
        }
    }
    let (h1, s1) = (h.clone(), s.clone());
    let f = move |t: f64| {
        let st = s1.eval(t);
        let ds = s1.deriv(t);
        let sd = st.adjoint();
        let out = &sd * h1.eval(t) * &st - &sd * ds * crate::ops::I;
        (&out + out.adjoint()) * r(0.5)
    };
    Ok(TimeDepOperator::new(h.dim(), h.window(), f).with_role(crate::ops::Role::Hamiltonian))
}

/// S X S† for a frame operator S (back to the original frame).
pub fn to_original_frame(x: &TimeDepOperator, s: &TimeDepOperator) -> TimeDepOperator {
    let (x1, s1) = (x.clone(), s.clone());
    TimeDepOperator::new(x.dim(), x.window(), move |t| {
        let st = s1.eval(t);
        &st * x1.eval(t) * st.adjoint()
    })
    .with_role(x.role())
}
