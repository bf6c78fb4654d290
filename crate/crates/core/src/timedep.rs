//! Operator-valued functions of time.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::ops::{r, zeros, Mat, OperatorMatrix, Role, C64};

pub type MatFn = Arc<dyn Fn(f64) -> Mat + Send + Sync>;
/// Derivatives 0..=n at t.
pub type JetFn = Arc<dyn Fn(f64, usize) -> Vec<Mat> + Send + Sync>;

/// An operator-valued function on a window `[t_i, t_f]` with optional
/// analytic derivatives. Without them, `deriv` falls back to a centred finite
/// difference with step `(t_f − t_i)·1e−6`; `derivs` additionally accepts a
/// jet closure returning all derivatives up to a requested order.
#[derive(Clone)]
pub struct TimeDepOperator {
    dim: usize,
    t_i: f64,
    t_f: f64,
    role: Role,
    f: MatFn,
    df: Option<MatFn>,
    jet: Option<JetFn>,
}

impl fmt::Debug for TimeDepOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TimeDepOperator")
            .field("dim", &self.dim)
            .field("window", &(self.t_i, self.t_f))
            .field("role", &self.role)
            .field("analytic_deriv", &self.df.is_some())
            .field("jet", &self.jet.is_some())
            .finish()
    }
}

impl TimeDepOperator {
    pub fn new<F>(dim: usize, window: (f64, f64), f: F) -> Self
    where
        F: Fn(f64) -> Mat + Send + Sync + 'static,
    {
        Self { dim, t_i: window.0, t_f: window.1, role: Role::Generic, f: Arc::new(f), df: None, jet: None }
    }

    /// Build from a jet closure; value and first derivative are taken from it.
    pub fn from_jet<J>(dim: usize, window: (f64, f64), jet: J) -> Self
    where
        J: Fn(f64, usize) -> Vec<Mat> + Send + Sync + 'static,
    {
        let jet: JetFn = Arc::new(jet);
        let (j0, j1) = (jet.clone(), jet.clone());
        Self {
            dim,
            t_i: window.0,
            t_f: window.1,
            role: Role::Generic,
            f: Arc::new(move |t| j0(t, 0).swap_remove(0)),
            df: Some(Arc::new(move |t| j1(t, 1).swap_remove(1))),
            jet: Some(jet),
        }
    }

    pub fn with_deriv<D>(mut self, df: D) -> Self
    where
        D: Fn(f64) -> Mat + Send + Sync + 'static,
    {
        self.df = Some(Arc::new(df));
        self
    }

    pub fn with_role(mut self, role: Role) -> Self {
        self.role = role;
        self
    }

    pub fn with_jet<J>(mut self, jet: J) -> Self
    where
        J: Fn(f64, usize) -> Vec<Mat> + Send + Sync + 'static,
    {
        self.jet = Some(Arc::new(jet));
        self
    }

    pub fn without_deriv(mut self) -> Self {
        self.df = None;
        self.jet = None;
        self
    }

    pub fn zero(dim: usize, window: (f64, f64)) -> Self {
        Self::from_jet(dim, window, move |_, n| vec![zeros(dim); n + 1])
    }

    pub fn constant(m: Mat, window: (f64, f64)) -> Self {
        let dim = m.nrows();
        Self::from_jet(dim, window, move |_, n| {
            let mut out = vec![zeros(dim); n + 1];
            out[0] = m.clone();
            out
        })
    }

    /// s(t)·M for a scalar jet s (derivatives 0..=n).
    pub fn scalar_times<S>(m: Mat, window: (f64, f64), s: S) -> Self
    where
        S: Fn(f64, usize) -> Vec<f64> + Send + Sync + 'static,
    {
        let dim = m.nrows();
        Self::from_jet(dim, window, move |t, n| s(t, n).into_iter().map(|v| &m * r(v)).collect())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn window(&self) -> (f64, f64) {
        (self.t_i, self.t_f)
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn has_analytic_deriv(&self) -> bool {
        self.df.is_some() || self.jet.is_some()
    }

    pub fn has_jet(&self) -> bool {
        self.jet.is_some()
    }

    #[inline]
    pub fn eval(&self, t: f64) -> Mat {
        (self.f)(t)
    }

    /// Evaluate as a role-checked operator.
    pub fn eval_op(&self, t: f64) -> Result<OperatorMatrix> {
        OperatorMatrix::new(self.eval(t), self.role)
    }

    pub fn fd_step(&self) -> f64 {
        (self.t_f - self.t_i).abs() * 1e-6
    }

    pub fn deriv(&self, t: f64) -> Mat {
        match (&self.df, &self.jet) {
            (Some(df), _) => df(t),
            (None, Some(j)) => j(t, 1).swap_remove(1),
            (None, None) => self.fd_deriv(t),
        }
    }

    /// Derivatives 0..=n at t (n ≤ 4 without a jet): exact with a jet,
    /// otherwise central differences of the analytic first derivative (step
    /// `(t_f − t_i)·1e−4`) or of the values themselves (step `·1e−3`).
    pub fn derivs(&self, t: f64, n: usize) -> Vec<Mat> {
        if let Some(j) = &self.jet {
            return j(t, n);
        }
        let mut out = vec![self.eval(t)];
        if n >= 1 {
            out.push(self.deriv(t));
        }
        if n >= 2 && self.df.is_some() {
            let h = (self.t_f - self.t_i).abs() * 1e-4;
            let p: Vec<Mat> = (-2i32..=2).map(|k| self.deriv(t + k as f64 * h)).collect();
            for k in 2..=n {
                out.push(match k {
                    2 => (&p[3] - &p[1]) * r(0.5 / h),
                    3 => (&p[3] - &p[2] * r(2.0) + &p[1]) * r(1.0 / (h * h)),
                    4 => (&p[4] - &p[3] * r(2.0) + &p[1] * r(2.0) - &p[0]) * r(0.5 / (h * h * h)),
                    _ => zeros(self.dim),
                });
            }
        } else if n >= 2 {
            let h = (self.t_f - self.t_i).abs() * 1e-3;
            let p: Vec<Mat> = (-2i32..=2).map(|k| self.eval(t + k as f64 * h)).collect();
            for k in 2..=n {
                out.push(match k {
                    2 => (&p[3] - &p[2] * r(2.0) + &p[1]) * r(1.0 / (h * h)),
                    3 => (&p[4] - &p[3] * r(2.0) + &p[1] * r(2.0) - &p[0]) * r(0.5 / (h * h * h)),
                    4 => (&p[4] - &p[3] * r(4.0) + &p[2] * r(6.0) - &p[1] * r(4.0) + &p[0]) * r(1.0 / (h * h * h * h)),
                    _ => zeros(self.dim),
                });
            }
        }
        out
    }

    pub fn fd_deriv(&self, t: f64) -> Mat {
        let h = self.fd_step();
        ((self.f)(t + h) - (self.f)(t - h)) * r(0.5 / h)
    }

    pub fn check_time(&self, t: f64) -> Result<()> {
        let (lo, hi) = (self.t_i.min(self.t_f), self.t_i.max(self.t_f));
        let slack = 1e-12 * (1.0 + hi.abs().max(lo.abs()));
        if t < lo - slack || t > hi + slack {
            return Err(Error::OutOfWindow { t, t_i: self.t_i, t_f: self.t_f });
        }
        Ok(())
    }

    /// Same function on a different window.
    pub fn on_window(&self, window: (f64, f64)) -> Self {
        let mut out = self.clone();
        out.t_i = window.0;
        out.t_f = window.1;
        out
    }

    pub fn add(&self, other: &TimeDepOperator) -> Self {
        let (a, b) = (self.f.clone(), other.f.clone());
        let mut out = Self::new(self.dim, self.window(), move |t| a(t) + b(t));
        out.role = if self.role == other.role { self.role } else { Role::Generic };
        if self.has_analytic_deriv() && other.has_analytic_deriv() {
            let (a, b) = (self.clone(), other.clone());
            out.df = Some(Arc::new(move |t| a.deriv(t) + b.deriv(t)));
        }
        if self.has_jet() && other.has_jet() {
            let (ja, jb) = (self.jet.clone().unwrap(), other.jet.clone().unwrap());
            out.jet = Some(Arc::new(move |t, n| ja(t, n).into_iter().zip(jb(t, n)).map(|(x, y)| x + y).collect()));
        }
        out
    }

    pub fn sub(&self, other: &TimeDepOperator) -> Self {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, s: f64) -> Self {
        self.scale_c(r(s))
    }

    pub fn scale_c(&self, s: C64) -> Self {
        let a = self.f.clone();
        let mut out = Self::new(self.dim, self.window(), move |t| a(t) * s);
        out.role = if s.im == 0.0 { self.role } else { Role::Generic };
        if self.has_analytic_deriv() {
            let a = self.clone();
            out.df = Some(Arc::new(move |t| a.deriv(t) * s));
        }
        if let Some(j) = self.jet.clone() {
            out.jet = Some(Arc::new(move |t, n| j(t, n).into_iter().map(|m| m * s).collect()));
        }
        out
    }

    /// Apply a fixed linear map elementwise in time (derivative carried through).
    pub fn map_linear<G>(&self, g: G) -> Self
    where
        G: Fn(&Mat) -> Mat + Send + Sync + 'static,
    {
        let g = Arc::new(g);
        let a = self.f.clone();
        let g1 = g.clone();
        let mut out = Self::new(self.dim, self.window(), move |t| g1(&a(t)));
        out.role = self.role;
        if self.has_analytic_deriv() {
            let (a, g2) = (self.clone(), g.clone());
            out.df = Some(Arc::new(move |t| g2(&a.deriv(t))));
        }
        if let Some(j) = self.jet.clone() {
            out.jet = Some(Arc::new(move |t, n| j(t, n).iter().map(|m| g(m)).collect()));
        }
        out
    }

    /// Sum of a non-empty list of operators.
    pub fn sum(ops: &[TimeDepOperator]) -> Self {
        let mut acc = ops[0].clone();
        for o in &ops[1..] {
            acc = acc.add(o);
        }
        acc
    }

    /// Sample the operator on a uniform grid of `n` points including both ends.
    pub fn sample(&self, n: usize) -> Vec<(f64, Mat)> {
        uniform_grid(self.t_i, self.t_f, n).into_iter().map(|t| (t, self.eval(t))).collect()
    }

    /// Largest Hermiticity defect over `n` uniform samples.
    pub fn hermitian_defect(&self, n: usize) -> (f64, f64) {
        let mut worst = (self.t_i, 0.0);
        for (t, m) in self.sample(n) {
            let d = crate::ops::hermitian_defect(&m);
            if d > worst.1 {
                worst = (t, d);
            }
        }
        worst
    }
}

pub fn uniform_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect()
}
