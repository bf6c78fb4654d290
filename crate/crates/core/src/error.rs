use thiserror::Error;

use crate::ops::Role;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },
    #[error("operator violates {role:?} role: defect {defect:.3e} > {tol:.1e}")]
    Role { role: Role, defect: f64, tol: f64 },
    #[error("invalid partition: {0}")]
    Partition(String),
    #[error("invalid parameter: {0}")]
    Param(String),
    #[error("step size underflow at t = {t}")]
    StepUnderflow { t: f64 },
    #[error("maximum number of steps exceeded at t = {t}")]
    MaxSteps { t: f64 },
    #[error("non-Hermitian Hamiltonian at t = {t}: defect {defect:.3e}")]
    NonHermitian { t: f64, defect: f64 },
    #[error("non-unitary frame at t = {t}: defect {defect:.3e}")]
    NonUnitary { t: f64, defect: f64 },
    #[error("time {t} outside window [{t_i}, {t_f}]")]
    OutOfWindow { t: f64, t_i: f64, t_f: f64 },
    #[error("window mismatch: [{a_i}, {a_f}] vs [{b_i}, {b_f}]")]
    WindowMismatch { a_i: f64, a_f: f64, b_i: f64, b_f: f64 },
    #[error("quadrature did not converge: estimated error {err:.3e}")]
    Quadrature { err: f64 },
    #[error("boundary condition violated: ‖V(t)‖ = {norm:.3e} at t = {t} exceeds {tol:.1e}")]
    Boundary { t: f64, norm: f64, tol: f64 },
    #[error("generator does not vanish at t_f: ‖r(t_f)‖ = {norm:.3e}")]
    GeneratorBoundary { norm: f64 },
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("mask is not Hermitian-symmetric at ({i}, {j})")]
    AsymmetricMask { i: usize, j: usize },
    #[error("correction needs forbidden couplings: {0:?}")]
    ForbiddenCoupling(Vec<(usize, usize)>),
    #[error("closure condition fails: residual {residual:.3e}")]
    Closure { residual: f64 },
    #[error("too few samples for fit: {0}")]
    FitSamples(usize),
    #[error("non-positive value in fit samples")]
    FitNonPositive,
    #[error("index {index} out of range for dimension {dim}")]
    Index { index: usize, dim: usize },
    #[error("no interior optimum in bracket [{lo}, {hi}]; boundary {at} returned")]
    NoInteriorOptimum { lo: f64, hi: f64, at: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
