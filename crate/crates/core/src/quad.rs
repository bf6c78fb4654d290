//! Adaptive Gauss–Kronrod (7/15) quadrature for scalar and matrix integrands.

use crate::error::{Error, Result};
use crate::ops::{max_abs, Mat};

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];

const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];

const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

const MAX_SEGMENTS: usize = 20_000;

trait Integrand: Clone {
    fn zero_like(&self) -> Self;
    fn axpy(&mut self, w: f64, x: &Self);
    fn size(&self) -> f64;
}

impl Integrand for f64 {
    fn zero_like(&self) -> Self {
        0.0
    }
    fn axpy(&mut self, w: f64, x: &Self) {
        *self += w * x;
    }
    fn size(&self) -> f64 {
        self.abs()
    }
}

impl Integrand for Mat {
    fn zero_like(&self) -> Self {
        Mat::zeros(self.nrows(), self.ncols())
    }
    fn axpy(&mut self, w: f64, x: &Self) {
        *self += x * crate::ops::r(w);
    }
    fn size(&self) -> f64 {
        max_abs(self)
    }
}

fn gk15<T: Integrand, F: FnMut(f64) -> T>(f: &mut F, a: f64, b: f64) -> (T, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc.zero_like();
    let mut gauss = fc.zero_like();
    kron.axpy(WGK[7], &fc);
    gauss.axpy(WG[3], &fc);
    for j in 0..7 {
        let x = h * XGK[j];
        let f1 = f(c - x);
        let f2 = f(c + x);
        kron.axpy(WGK[j], &f1);
        kron.axpy(WGK[j], &f2);
        if j % 2 == 1 {
            gauss.axpy(WG[j / 2], &f1);
            gauss.axpy(WG[j / 2], &f2);
        }
    }
    let mut diff = kron.clone();
    diff.axpy(-1.0, &gauss);
    let mut out = kron.zero_like();
    out.axpy(h, &kron);
    (out, (h * diff.size()).abs())
}

fn adaptive<T: Integrand, F: FnMut(f64) -> T>(mut f: F, a: f64, b: f64, abs_tol: f64, init: usize) -> Result<T> {
    if a == b {
        let z = f(a);
        return Ok(z.zero_like());
    }
    let init = init.max(1);
    let mut segs: Vec<(f64, f64, T, f64)> = (0..init)
        .map(|k| {
            let lo = a + (b - a) * k as f64 / init as f64;
            let hi = a + (b - a) * (k + 1) as f64 / init as f64;
            let (v, e) = gk15(&mut f, lo, hi);
            (lo, hi, v, e)
        })
        .collect();
    loop {
        let total_err: f64 = segs.iter().map(|s| s.3).sum();
        if total_err <= abs_tol {
            break;
        }
        if segs.len() >= MAX_SEGMENTS {
            return Err(Error::Quadrature { err: total_err });
        }
        let (worst, _) = segs.iter().enumerate().fold((0, -1.0), |acc, (k, s)| if s.3 > acc.1 { (k, s.3) } else { acc });
        let (lo, hi, _, _) = segs.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        if mid <= lo.min(hi) || mid >= lo.max(hi) {
            return Err(Error::Quadrature { err: total_err });
        }
        let (v1, e1) = gk15(&mut f, lo, mid);
        let (v2, e2) = gk15(&mut f, mid, hi);
        segs.push((lo, mid, v1, e1));
        segs.push((mid, hi, v2, e2));
    }
    let mut acc = segs[0].2.zero_like();
    for s in &segs {
        acc.axpy(1.0, &s.2);
    }
    Ok(acc)
}

/// ∫_a^b f(t) dt to absolute tolerance `abs_tol`.
pub fn integrate<F: FnMut(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64) -> Result<f64> {
    adaptive(f, a, b, abs_tol, 8)
}

/// Matrix-valued ∫_a^b f(t) dt with the max-abs entry error below `abs_tol`.
pub fn integrate_mat<F: FnMut(f64) -> Mat>(f: F, a: f64, b: f64, abs_tol: f64) -> Result<Mat> {
    adaptive(f, a, b, abs_tol, 8)
}

/// Same as [`integrate`] with a chosen number of initial panels.
pub fn integrate_panels<F: FnMut(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64, panels: usize) -> Result<f64> {
    adaptive(f, a, b, abs_tol, panels)
}

pub fn integrate_mat_panels<F: FnMut(f64) -> Mat>(f: F, a: f64, b: f64, abs_tol: f64, panels: usize) -> Result<Mat> {
    adaptive(f, a, b, abs_tol, panels)
}
