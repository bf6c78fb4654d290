//! Verner 6(5) adaptive Runge–Kutta with continuous fifth-order output,
//! specialised to flat complex state vectors.

use crate::error::{Error, Result};
use crate::ops::C64;

const STAGES: usize = 9;
const DENSE_ORDER: usize = 6;

const C: [f64; STAGES] = [0.0, 0.06, 9.593333333333333e-2, 0.1439, 0.4973, 0.9725, 0.9995, 1.0, 1.0];

const A: [[f64; STAGES]; STAGES] = [
    [0.0; 9],
    [0.06, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.9239962962962962e-2, 7.669337037037037e-2, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.35975e-1, 0.0, 0.107925, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.3186834152331484, 0.0, -5.042058063628562, 4.220674648395414, 0.0, 0.0, 0.0, 0.0, 0.0],
    [-41.872591664327516, 0.0, 159.4325621631375, -122.11921356501003, 5.531743066200054, 0.0, 0.0, 0.0, 0.0],
    [
        -54.430156935316504,
        0.0,
        207.06725136501848,
        -158.61081378459,
        6.991816585950242,
        -1.8597231062203234e-2,
        0.0,
        0.0,
        0.0,
    ],
    [
        -54.66374178728198,
        0.0,
        207.95280625538936,
        -159.2889574744995,
        7.018743740796944,
        -1.8338785905045722e-2,
        -5.119484997882099e-4,
        0.0,
        0.0,
    ],
    [
        3.438957868357036e-2,
        0.0,
        0.0,
        0.2582624555633503,
        0.4209371189673537,
        4.40539646966931,
        -176.48311902429865,
        172.36413340141507,
        0.0,
    ],
];

const B_HIGH: [f64; STAGES] = [
    3.438957868357036e-2,
    0.0,
    0.0,
    0.2582624555633503,
    0.4209371189673537,
    4.40539646966931,
    -176.48311902429865,
    172.36413340141507,
    0.0,
];

const B_LOW: [f64; STAGES] = [
    4.90996764838249e-2,
    0.0,
    0.0,
    0.22511122295165242,
    0.4694682253029562,
    0.8065792249988868,
    0.0,
    -0.607119489177796,
    5.6861139440475696e-2,
];

const C_DENSE: f64 = 0.5;

const A_DENSE: [f64; STAGES] = [
    1.6524159013572806e-2,
    0.0,
    0.0,
    0.3053128187514179,
    0.2071200938201979,
    -1.293879140655123,
    57.11988411588149,
    -55.87979207510932,
    2.4830028297766014e-2,
];

const B_DENSE: [[f64; DENSE_ORDER]; STAGES + 1] = [
    [1.0, -5.308169607103577, 10.18168044895868, -7.520036991611715, 0.9340485368631161, 0.746867191577065],
    [0.0; 6],
    [0.0; 6],
    [0.0, 6.272050253212501, -16.02618147467746, 12.844356324519618, -1.1487945044767591, -1.6831681430145498],
    [0.0, 6.876491702846304, -24.635767260846333, 33.21078648379717, -17.49461528263644, 2.4640414758066496],
    [0.0, -35.5444517105996, 165.7016170190242, -385.4635395491143, 442.43241370157017, -182.7206429912112],
    [0.0, 1918.6548566980114, -9268.121508966042, 20858.33702877255, -22645.82767158481, 8960.474176055992],
    [0.0, -1883.0698021327182, 9101.025187200634, -20473.188551959534, 22209.765551256532, -8782.1682509635],
    [0.0, 0.11902479635123643, -0.12502696705039376, 1.7799569193949991, -4.660932123043763, 2.886977374347921],
    [0.0, -8.0, 32.0, -40.0, 16.0, 0.0],
];

/// Integrator settings. `tol` acts as both absolute and relative tolerance.
#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub tol: f64,
    pub max_steps: usize,
    pub h_max: Option<f64>,
    pub dense: bool,
}

impl OdeOptions {
    pub fn new(tol: f64) -> Self {
        Self { tol, max_steps: 2_000_000, h_max: None, dense: true }
    }

    pub fn final_only(mut self) -> Self {
        self.dense = false;
        self
    }

    pub fn h_max(mut self, h: f64) -> Self {
        self.h_max = Some(h);
        self
    }
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self::new(1e-10)
    }
}

/// Accepted steps with their interpolation polynomials.
#[derive(Debug, Clone)]
pub struct DenseSolution {
    n: usize,
    t0: f64,
    t1: f64,
    starts: Vec<f64>,
    widths: Vec<f64>,
    y_starts: Vec<C64>,
    poly: Vec<C64>,
    y_end: Vec<C64>,
    pub accepted: usize,
    pub rejected: usize,
    pub evals: usize,
}

impl DenseSolution {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn span(&self) -> (f64, f64) {
        (self.t0, self.t1)
    }

    pub fn y_final(&self) -> &[C64] {
        &self.y_end
    }

    pub fn has_dense(&self) -> bool {
        !self.starts.is_empty() || self.t0 == self.t1
    }

    /// Step boundaries including both ends.
    pub fn grid(&self) -> Vec<f64> {
        let mut g = self.starts.clone();
        g.push(self.t1);
        g
    }

    /// Interpolated state at `t` (clamped to the integration span).
    pub fn eval(&self, t: f64) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); self.n];
        self.eval_into(t, &mut out);
        out
    }

    pub fn eval_into(&self, t: f64, out: &mut [C64]) {
        assert!(self.has_dense(), "dense output was not recorded");
        let n = self.n;
        if self.starts.is_empty() {
            out.copy_from_slice(&self.y_end);
            return;
        }
        let t = t.clamp(self.t0.min(self.t1), self.t0.max(self.t1));
        let k = if self.t1 >= self.t0 {
            self.starts.partition_point(|&s| s <= t)
        } else {
            self.starts.partition_point(|&s| s >= t)
        };
        let k = k.saturating_sub(1);
        let h = self.widths[k];
        let s = (t - self.starts[k]) / h;
        let y0 = &self.y_starts[k * n..(k + 1) * n];
        let p = &self.poly[k * n * DENSE_ORDER..(k + 1) * n * DENSE_ORDER];
        for i in 0..n {
            let mut acc = p[(DENSE_ORDER - 1) * n + i];
            for j in (0..DENSE_ORDER - 1).rev() {
                acc = acc * s + p[j * n + i];
            }
            out[i] = y0[i] + acc * s;
        }
    }
}

fn err_norm(y: &[C64], yh: &[C64], yl: &[C64], tol: f64) -> f64 {
    let mut e = 0.0_f64;
    for i in 0..y.len() {
        let sc = tol * (1.0 + y[i].norm().max(yh[i].norm()));
        e = e.max((yh[i] - yl[i]).norm() / sc);
    }
    e
}

/// Integrate `y' = f(t, y)` from `t0` to `t1` (either direction).
pub fn solve<F>(mut f: F, t0: f64, t1: f64, y0: &[C64], opts: OdeOptions) -> Result<DenseSolution>
where
    F: FnMut(f64, &[C64], &mut [C64]),
{
    let n = y0.len();
    let zero = C64::new(0.0, 0.0);
    let mut sol = DenseSolution {
        n,
        t0,
        t1,
        starts: Vec::new(),
        widths: Vec::new(),
        y_starts: Vec::new(),
        poly: Vec::new(),
        y_end: y0.to_vec(),
        accepted: 0,
        rejected: 0,
        evals: 0,
    };
    if t0 == t1 {
        return Ok(sol);
    }
    let dir = (t1 - t0).signum();
    let span = (t1 - t0).abs();
    let h_max = opts.h_max.unwrap_or(span / 32.0).min(span);

    let mut k: Vec<Vec<C64>> = vec![vec![zero; n]; STAGES + 1];
    let mut y = y0.to_vec();
    let mut ys = vec![zero; n];
    let mut yh = vec![zero; n];
    let mut yl = vec![zero; n];
    let mut t = t0;

    f(t, &y, &mut k[0]);
    sol.evals += 1;

    let mut h = {
        let sc = |v: &C64, i: usize| v.norm() / (opts.tol * (1.0 + y[i].norm()));
        let d0 = y.iter().enumerate().fold(0.0_f64, |a, (i, v)| a.max(sc(v, i)));
        let d1 = k[0].iter().enumerate().fold(0.0_f64, |a, (i, v)| a.max(sc(v, i)));
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 * span } else { 0.01 * d0 / d1 };
        let h0 = h0.min(h_max);
        for i in 0..n {
            ys[i] = y[i] + k[0][i] * (dir * h0);
        }
        f(t + dir * h0, &ys, &mut k[1]);
        sol.evals += 1;
        let d2 = (0..n).fold(0.0_f64, |a, i| a.max(sc(&(k[1][i] - k[0][i]), i))) / h0;
        let h1 = if d1.max(d2) <= 1e-15 { (h0 * 1e-3).max(1e-6 * span) } else { (0.01 / d1.max(d2)).powf(1.0 / 6.0) };
        (100.0 * h0).min(h1).min(h_max).max(1e-12 * span)
    };

    let mut last_rejected = false;
    while dir * (t1 - t) > 0.0 {
        if sol.accepted + sol.rejected >= opts.max_steps {
            return Err(Error::MaxSteps { t });
        }
        if h < 1e-14 * (1.0 + t.abs()) {
            return Err(Error::StepUnderflow { t });
        }
        let mut last = false;
        if h >= (t1 - t).abs() * (1.0 - 1e-12) {
            h = (t1 - t).abs();
            last = true;
        }
        let hs = dir * h;

        for s in 1..STAGES {
            for i in 0..n {
                let mut acc = y[i];
                for j in 0..s {
                    let a = A[s][j];
                    if a != 0.0 {
                        acc += k[j][i] * (a * hs);
                    }
                }
                ys[i] = acc;
            }
            f(t + C[s] * hs, &ys, &mut k[s]);
        }
        sol.evals += STAGES - 1;

        for i in 0..n {
            let mut hi = y[i];
            let mut lo = y[i];
            for s in 0..STAGES {
                if B_HIGH[s] != 0.0 {
                    hi += k[s][i] * (B_HIGH[s] * hs);
                }
                if B_LOW[s] != 0.0 {
                    lo += k[s][i] * (B_LOW[s] * hs);
                }
            }
            yh[i] = hi;
            yl[i] = lo;
        }
        let err = err_norm(&y, &yh, &yl, opts.tol);
        if !err.is_finite() {
            sol.rejected += 1;
            h *= 0.2;
            last_rejected = true;
            continue;
        }
        if err <= 1.0 {
            if opts.dense {
                for i in 0..n {
                    let mut acc = y[i];
                    for j in 0..STAGES {
                        if A_DENSE[j] != 0.0 {
                            acc += k[j][i] * (A_DENSE[j] * hs);
                        }
                    }
                    ys[i] = acc;
                }
                f(t + C_DENSE * hs, &ys, &mut k[STAGES]);
                sol.evals += 1;
                sol.starts.push(t);
                sol.widths.push(hs);
                sol.y_starts.extend_from_slice(&y);
                let base = sol.poly.len();
                sol.poly.resize(base + DENSE_ORDER * n, zero);
                for j in 0..DENSE_ORDER {
                    for i in 0..n {
                        let mut acc = zero;
                        for (s, row) in B_DENSE.iter().enumerate() {
                            if row[j] != 0.0 {
                                acc += k[s][i] * row[j];
                            }
                        }
                        sol.poly[base + j * n + i] = acc * hs;
                    }
                }
            }
            t = if last { t1 } else { t + hs };
            y.copy_from_slice(&yh);
            let fsal = k[STAGES - 1].clone();
            k[0].copy_from_slice(&fsal);
            sol.accepted += 1;
            let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-1.0 / 6.0)).clamp(0.2, 5.0) };
            let fac = if last_rejected { fac.min(1.0) } else { fac };
            h = (h * fac).min(h_max);
            last_rejected = false;
        } else {
            sol.rejected += 1;
            h *= (0.9 * err.powf(-1.0 / 6.0)).clamp(0.2, 0.9);
            last_rejected = true;
        }
    }
    sol.y_end = y;
    Ok(sol)
}
