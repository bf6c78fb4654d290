//! Dense complex operators and the small amount of linear algebra built on them.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type Mat = DMatrix<C64>;

pub const HERMITIAN_TOL: f64 = 1e-12;
pub const UNITARY_TOL: f64 = 1e-10;
pub const MAGNUS_TOL: f64 = 1e-10;

pub const I: C64 = C64 { re: 0.0, im: 1.0 };

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub fn r(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Role tag carried by an [`OperatorMatrix`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Hamiltonian,
    Unitary,
    Magnus,
    Generic,
}

/// An N×N complex matrix together with the role it plays.
///
/// The role is validated on construction: Hamiltonians must be Hermitian,
/// unitaries unitary and Magnus terms anti-Hermitian.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    m: Mat,
    role: Role,
}

impl OperatorMatrix {
    pub fn new(m: Mat, role: Role) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::Dimension { expected: m.nrows(), found: m.ncols() });
        }
        let defect = match role {
            Role::Hamiltonian => hermitian_defect(&m),
            Role::Unitary => unitarity_defect(&m),
            Role::Magnus => antihermitian_defect(&m),
            Role::Generic => 0.0,
        };
        let tol = match role {
            Role::Hamiltonian => HERMITIAN_TOL,
            Role::Unitary => UNITARY_TOL,
            Role::Magnus => MAGNUS_TOL,
            Role::Generic => f64::INFINITY,
        };
        if defect > tol {
            return Err(Error::Role { role, defect, tol });
        }
        Ok(Self { m, role })
    }

    pub fn generic(m: Mat) -> Self {
        Self { m, role: Role::Generic }
    }

    pub fn hamiltonian(m: Mat) -> Result<Self> {
        Self::new(m, Role::Hamiltonian)
    }

    pub fn unitary(m: Mat) -> Result<Self> {
        Self::new(m, Role::Unitary)
    }

    pub fn magnus(m: Mat) -> Result<Self> {
        Self::new(m, Role::Magnus)
    }

    pub fn identity(n: usize) -> Self {
        Self { m: Mat::identity(n, n), role: Role::Unitary }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn matrix(&self) -> &Mat {
        &self.m
    }

    pub fn into_matrix(self) -> Mat {
        self.m
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        hermitian_defect(&self.m) <= tol
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        unitarity_defect(&self.m) <= tol
    }

    pub fn is_antihermitian(&self, tol: f64) -> bool {
        antihermitian_defect(&self.m) <= tol
    }
}

pub fn zeros(n: usize) -> Mat {
    Mat::zeros(n, n)
}

pub fn eye(n: usize) -> Mat {
    Mat::identity(n, n)
}

/// |i⟩⟨j| in dimension n.
pub fn ket_bra(n: usize, i: usize, j: usize) -> Mat {
    let mut m = zeros(n);
    m[(i, j)] = r(1.0);
    m
}

pub fn diag(d: &[C64]) -> Mat {
    let n = d.len();
    let mut m = zeros(n);
    for (k, &v) in d.iter().enumerate() {
        m[(k, k)] = v;
    }
    m
}

pub fn diag_real(d: &[f64]) -> Mat {
    diag(&d.iter().map(|&x| r(x)).collect::<Vec<_>>())
}

pub fn from_rows(rows: &[&[C64]]) -> Mat {
    let n = rows.len();
    Mat::from_fn(n, rows[0].len(), |i, j| rows[i][j])
}

pub fn dagger(m: &Mat) -> Mat {
    m.adjoint()
}

pub fn comm(a: &Mat, b: &Mat) -> Mat {
    a * b - b * a
}

/// Hermitian part plus its conjugate: m + m†.
pub fn plus_hc(m: &Mat) -> Mat {
    m + m.adjoint()
}

pub fn max_abs(m: &Mat) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

pub fn max_abs_diff(a: &Mat, b: &Mat) -> f64 {
    max_abs(&(a - b))
}

pub fn hermitian_defect(m: &Mat) -> f64 {
    max_abs(&(m - m.adjoint()))
}

pub fn antihermitian_defect(m: &Mat) -> f64 {
    max_abs(&(m + m.adjoint()))
}

pub fn unitarity_defect(m: &Mat) -> f64 {
    let n = m.nrows();
    max_abs(&(m.adjoint() * m - eye(n)))
}

/// Largest singular value.
pub fn spectral_norm(m: &Mat) -> f64 {
    if m.iter().all(|z| *z == C64::new(0.0, 0.0)) {
        return 0.0;
    }
    m.clone().singular_values().max()
}

pub fn frobenius_norm(m: &Mat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn trace(m: &Mat) -> C64 {
    m.trace()
}

/// Matrix exponential (scaling and squaring with a Padé approximant).
pub fn expm(m: &Mat) -> Mat {
    m.clone().exp()
}

/// Eigen-decomposition of a Hermitian matrix with ascending eigenvalues.
pub fn eigh(m: &Mat) -> (Vec<f64>, Mat) {
    let h = (m + m.adjoint()) * r(0.5);
    let eig = h.symmetric_eigen();
    let n = m.nrows();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = idx.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vecs = Mat::from_fn(n, n, |i, j| eig.eigenvectors[(i, idx[j])]);
    (vals, vecs)
}

/// Principal logarithm of a unitary matrix; the result is anti-Hermitian.
pub fn logm_unitary(u: &Mat) -> Mat {
    let n = u.nrows();
    let re_part = (u + u.adjoint()) * r(0.5);
    let im_part = (u - u.adjoint()) * c(0.0, -0.5);
    let mix = &re_part * r(0.618_033_988_749_894_9) + &im_part * r(1.324_717_957_244_746);
    let (_, v) = eigh(&mix);
    let d = v.adjoint() * u * &v;
    let mut l = zeros(n);
    for k in 0..n {
        l[(k, k)] = d[(k, k)].ln();
    }
    let out = &v * l * v.adjoint();
    (&out - out.adjoint()) * r(0.5)
}

/// Polar projection onto the nearest unitary; diagnostics only.
pub fn polar_unitary(m: &Mat) -> Mat {
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("svd u");
    let vt = svd.v_t.expect("svd v_t");
    u * vt
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_spectrum(m: &Mat) -> Vec<f64> {
    eigh(m).0
}

/// Diagonal part of a matrix.
pub fn diag_part(m: &Mat) -> Mat {
    let n = m.nrows();
    Mat::from_fn(n, n, |i, j| if i == j { m[(i, j)] } else { r(0.0) })
}

pub fn pauli_x() -> Mat {
    from_rows(&[&[r(0.0), r(1.0)], &[r(1.0), r(0.0)]])
}

pub fn pauli_y() -> Mat {
    from_rows(&[&[r(0.0), c(0.0, -1.0)], &[c(0.0, 1.0), r(0.0)]])
}

pub fn pauli_z() -> Mat {
    from_rows(&[&[r(1.0), r(0.0)], &[r(0.0), r(-1.0)]])
}

/// Flatten a matrix row-major into a slice.
pub fn write_flat(m: &Mat, out: &mut [C64]) {
    let n = m.nrows();
    let k = m.ncols();
    for i in 0..n {
        for j in 0..k {
            out[i * k + j] = m[(i, j)];
        }
    }
}

/// Read a square matrix stored row-major.
pub fn read_flat(data: &[C64], n: usize) -> Mat {
    Mat::from_fn(n, n, |i, j| data[i * n + j])
}
