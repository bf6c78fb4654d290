//! Parameter grids, threshold crossings and parallel sweeps.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// `n` evenly spaced points from `lo` to `hi` inclusive.
pub fn linear_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let mut g = crate::timedep::uniform_grid(lo, hi, n);
    if n > 1 {
        g[n - 1] = hi;
    }
    g
}

/// `n` logarithmically spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi > lo) || n < 2 {
        return Err(Error::Param(format!("log grid needs 0 < lo < hi and n >= 2, got [{lo}, {hi}], n = {n}")));
    }
    let (a, b) = (lo.ln(), hi.ln());
    Ok((0..n).map(|k| if k == n - 1 { hi } else { (a + (b - a) * k as f64 / (n - 1) as f64).exp() }).collect())
}

/// First upward crossing of `threshold` scanning the samples in order, with
/// log-log interpolation between the bracketing points. `None` if the
/// curve never exceeds the threshold, or starts above it.
pub fn first_crossing(xs: &[f64], ys: &[f64], threshold: f64) -> Option<f64> {
    if ys.first().map_or(true, |&y| y > threshold) {
        return None;
    }
    for k in 1..xs.len() {
        if ys[k] > threshold {
            let (x0, x1) = (xs[k - 1], xs[k]);
            let (y0, y1) = (ys[k - 1].max(f64::MIN_POSITIVE), ys[k]);
            let f = (threshold.ln() - y0.ln()) / (y1.ln() - y0.ln());
            return Some((x0.ln() + f * (x1.ln() - x0.ln())).exp());
        }
    }
    None
}

/// Evaluate `f` on every grid point in parallel; results keep grid order.
pub fn par_map<T, F>(grid: &[f64], f: F) -> Vec<T>
where
    T: Send,
    F: Fn(f64) -> T + Sync + Send,
{
    grid.par_iter().map(|&x| f(x)).collect()
}

/// Bisection for a sign change of `f` on [lo, hi].
pub fn bisect<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64> {
    let (mut flo, fhi) = (f(lo), f(hi));
    if flo.signum() == fhi.signum() {
        return Err(Error::Param(format!("no sign change on [{lo}, {hi}]")));
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn crossing_of_power_law() {
        let xs = log_grid(0.1, 10.0, 21).unwrap();
        let ys: Vec<f64> = xs.iter().map(|x| 1e-3 * (x / 2.0).powi(2)).collect();
        let c = first_crossing(&xs, &ys, 1e-3).unwrap();
        assert!((c - 2.0).abs() < 1e-12);
        assert!(first_crossing(&xs, &vec![1.0; 21], 1e-3).is_none());
        assert!(first_crossing(&xs, &vec![0.0; 21], 1e-3).is_none());
    }

    #[test]
    fn grids_and_bisection() {
        let g = log_grid(1.0, 100.0, 3).unwrap();
        assert!((g[1] - 10.0).abs() < 1e-12 && g[2] == 100.0);
        assert!(log_grid(0.0, 1.0, 3).is_err());
        let root = bisect(|x| x * x - 2.0, 0.0, 2.0, 1e-12).unwrap();
        assert!((root - 2f64.sqrt()).abs() < 1e-11);
        let v = par_map(&[1.0, 2.0, 3.0], |x| x * 10.0);
        assert_eq!(v, vec![10.0, 20.0, 30.0]);
    }
}
