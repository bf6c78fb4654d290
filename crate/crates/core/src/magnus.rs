//! First three Magnus terms of an interaction-picture propagator.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::ode::{self, DenseSolution, OdeOptions};
use crate::ops::{c, comm, expm, read_flat, spectral_norm, write_flat, zeros, Mat, C64};
use crate::quad;
use crate::timedep::TimeDepOperator;

/// Ω₁, Ω₂, Ω₃ sharing one dense output.
#[derive(Clone)]
pub struct MagnusTerms {
    dim: usize,
    order: usize,
    window: (f64, f64),
    sol: Arc<DenseSolution>,
    source: TimeDepOperator,
}

impl std::fmt::Debug for MagnusTerms {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MagnusTerms").field("dim", &self.dim).field("order", &self.order).field("window", &self.window).finish()
    }
}

impl MagnusTerms {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn window(&self) -> (f64, f64) {
        self.window
    }

    pub fn source(&self) -> &TimeDepOperator {
        &self.source
    }

    /// Ω_k(t), k ∈ 1..=order.
    pub fn omega(&self, k: usize, t: f64) -> Mat {
        assert!(k >= 1 && k <= self.order, "Magnus index {k} not computed");
        let n2 = self.dim * self.dim;
        let y = self.sol.eval(t);
        read_flat(&y[(k - 1) * n2..k * n2], self.dim)
    }

    pub fn omega_final(&self, k: usize) -> Mat {
        assert!(k >= 1 && k <= self.order, "Magnus index {k} not computed");
        let n2 = self.dim * self.dim;
        read_flat(&self.sol.y_final()[(k - 1) * n2..k * n2], self.dim)
    }

    /// Ω₁ + … + Ω_order at t.
    pub fn sum(&self, t: f64) -> Mat {
        let n2 = self.dim * self.dim;
        let y = self.sol.eval(t);
        let mut acc = zeros(self.dim);
        for k in 0..self.order {
            acc += read_flat(&y[k * n2..(k + 1) * n2], self.dim);
        }
        acc
    }

    pub fn sum_final(&self) -> Mat {
        let mut acc = zeros(self.dim);
        for k in 1..=self.order {
            acc += self.omega_final(k);
        }
        acc
    }

    pub fn time_dep(&self, k: usize) -> TimeDepOperator {
        let me = self.clone();
        TimeDepOperator::new(self.dim, self.window, move |t| me.omega(k, t)).with_role(crate::ops::Role::Magnus)
    }
}

/// Co-integrate ∂Ω₁ = −iV_I, ∂Ω₂ = ½[∂Ω₁, Ω₁],
/// ∂Ω₃ = ½[∂Ω₁, Ω₂] − ⅙[Ω₁, ∂Ω₂].
pub fn magnus_terms(v_int: &TimeDepOperator, window: (f64, f64), order: usize, tol: f64) -> Result<MagnusTerms> {
    if !(1..=3).contains(&order) {
        return Err(Error::Param(format!("Magnus order {order} not in 1..=3")));
    }
    let n = v_int.dim();
    let n2 = n * n;
    let rhs = |t: f64, y: &[C64], dy: &mut [C64]| {
        let d1 = v_int.eval(t) * c(0.0, -1.0);
        write_flat(&d1, &mut dy[..n2]);
        if order >= 2 {
            let o1 = read_flat(&y[..n2], n);
            let d2 = comm(&d1, &o1) * c(0.5, 0.0);
            write_flat(&d2, &mut dy[n2..2 * n2]);
            if order >= 3 {
                let o2 = read_flat(&y[n2..2 * n2], n);
                let d3 = comm(&d1, &o2) * c(0.5, 0.0) - comm(&o1, &d2) * c(1.0 / 6.0, 0.0);
                write_flat(&d3, &mut dy[2 * n2..3 * n2]);
            }
        }
    };
    let y0 = vec![C64::new(0.0, 0.0); order * n2];
    let sol = ode::solve(rhs, window.0, window.1, &y0, OdeOptions::new(tol))?;
    Ok(MagnusTerms { dim: n, order, window, sol: Arc::new(sol), source: v_int.clone() })
}

/// ∫ ‖V_I(t)‖₂ dt; the expansion is guaranteed to converge below π.
pub fn convergence_certificate(v_int: &TimeDepOperator, window: (f64, f64)) -> Result<f64> {
    quad::integrate_panels(|t| spectral_norm(&v_int.eval(t)), window.0, window.1, 1e-9, 32).map(f64::abs)
}

/// Certificate together with the verdict.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Certificate {
    pub value: f64,
    pub converges: bool,
}

pub fn certify(v_int: &TimeDepOperator, window: (f64, f64)) -> Result<Certificate> {
    let value = convergence_certificate(v_int, window)?;
    Ok(Certificate { value, converges: value < std::f64::consts::PI })
}

/// exp(Ω₁ + … + Ω_order)(t).
pub fn error_propagator(terms: &MagnusTerms, t: f64) -> Mat {
    expm(&terms.sum(t))
}
