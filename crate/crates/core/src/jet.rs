//! Truncated Taylor jets: derivatives 0..=n of scalars and matrices at a point.

use crate::ops::{r, zeros, Mat};

fn binom(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Leibniz rule for a matrix product.
pub fn mul(a: &[Mat], b: &[Mat]) -> Vec<Mat> {
    let n = a.len().min(b.len());
    (0..n)
        .map(|m| {
            let mut acc = zeros(a[0].nrows());
            for k in 0..=m {
                acc += (&a[k] * &b[m - k]) * r(binom(m, k));
            }
            acc
        })
        .collect()
}

/// Jet of [a, b].
pub fn comm(a: &[Mat], b: &[Mat]) -> Vec<Mat> {
    mul(a, b).into_iter().zip(mul(b, a)).map(|(x, y)| x - y).collect()
}

/// Leibniz rule for scalars.
pub fn mul_scalar(a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = a.len().min(b.len());
    (0..n).map(|m| (0..=m).map(|k| binom(m, k) * a[k] * b[m - k]).sum()).collect()
}

/// Jet of 1/g.
pub fn recip(g: &[f64]) -> Vec<f64> {
    let mut out = vec![1.0 / g[0]];
    for n in 1..g.len() {
        let s: f64 = (1..=n).map(|k| binom(n, k) * g[k] * out[n - k]).sum();
        out.push(-s / g[0]);
    }
    out
}

/// Jet of a scalar times a matrix jet.
pub fn scale(s: &[f64], m: &[Mat]) -> Vec<Mat> {
    let n = s.len().min(m.len());
    (0..n)
        .map(|j| {
            let mut acc = zeros(m[0].nrows());
            for k in 0..=j {
                acc += &m[j - k] * r(binom(j, k) * s[k]);
            }
            acc
        })
        .collect()
}

/// Jet shifted by one order (derivative of a jet), dropping the top entry.
pub fn shift<T: Clone>(j: &[T]) -> Vec<T> {
    j[1..].to_vec()
}

/// Derivatives of exp(−x²) at x via the Hermite recurrence
/// dⁿ/dxⁿ e^{−x²} = (−1)ⁿ Hₙ(x) e^{−x²}.
pub fn gaussian(x: f64, n: usize) -> Vec<f64> {
    let e = (-x * x).exp();
    let mut h = vec![1.0, 2.0 * x];
    for k in 1..n {
        let next = 2.0 * x * h[k] - 2.0 * k as f64 * h[k - 1];
        h.push(next);
    }
    (0..=n).map(|k| if k % 2 == 0 { h[k] * e } else { -h[k] * e }).collect()
}

/// Chain rule for a linear inner map t ↦ a·t + b applied to an outer jet.
pub fn affine(outer: &[f64], a: f64) -> Vec<f64> {
    let mut p = 1.0;
    outer
        .iter()
        .map(|v| {
            let out = v * p;
            p *= a;
            out
        })
        .collect()
}

/// Derivatives of the logistic σ(u) = 1/(1+e^{−u}) with respect to u.
/// Each is a polynomial in σ: P₀ = σ, P_{k+1} = P_k'(σ)·σ(1−σ).
pub fn logistic(u: f64, n: usize) -> Vec<f64> {
    let s = if u >= 0.0 { 1.0 / (1.0 + (-u).exp()) } else { let e = u.exp(); e / (1.0 + e) };
    let mut poly = vec![0.0, 1.0];
    let mut out = Vec::with_capacity(n + 1);
    for _ in 0..=n {
        out.push(poly.iter().rev().fold(0.0, |acc, c| acc * s + c));
        let d: Vec<f64> = (1..poly.len()).map(|k| k as f64 * poly[k]).collect();
        let mut next = vec![0.0; d.len() + 2];
        for (k, c) in d.iter().enumerate() {
            next[k + 1] += c;
            next[k + 2] -= c;
        }
        poly = next;
    }
    out
}

/// Jet of √h for h > 0.
pub fn sqrt(h: &[f64]) -> Vec<f64> {
    let mut g = vec![h[0].sqrt()];
    for n in 1..h.len() {
        let s: f64 = (1..n).map(|k| binom(n, k) * g[k] * g[n - k]).sum();
        g.push((h[n] - s) / (2.0 * g[0]));
    }
    g
}

/// Jets of (sin θ, cos θ) from a jet of θ.
pub fn sin_cos(theta: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let (mut s, mut c) = (vec![theta[0].sin()], vec![theta[0].cos()]);
    for n in 0..theta.len() - 1 {
        let ds: f64 = (0..=n).map(|k| binom(n, k) * c[k] * theta[n + 1 - k]).sum();
        let dc: f64 = (0..=n).map(|k| -binom(n, k) * s[k] * theta[n + 1 - k]).sum();
        s.push(ds);
        c.push(dc);
    }
    (s, c)
}

/// Derivatives of sech u. Each is sech u times a polynomial in tanh u:
/// P₀ = 1, P_{k+1} = P_k'(T)(1−T²) − T·P_k.
pub fn sech(u: f64, n: usize) -> Vec<f64> {
    let (sh, th) = (1.0 / u.cosh(), u.tanh());
    let mut poly = vec![1.0];
    let mut out = Vec::with_capacity(n + 1);
    for _ in 0..=n {
        out.push(sh * poly.iter().rev().fold(0.0, |acc, c| acc * th + c));
        let mut next = vec![0.0; poly.len() + 1];
        for (k, c) in poly.iter().enumerate() {
            if k > 0 {
                next[k - 1] += k as f64 * c;
                next[k + 1] -= k as f64 * c;
            }
            next[k + 1] -= c;
        }
        poly = next;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd(f: impl Fn(f64) -> f64, x: f64) -> f64 {
        let h = 1e-5;
        (f(x + h) - f(x - h)) / (2.0 * h)
    }

    #[test]
    fn gaussian_matches_finite_differences() {
        let x = 0.37;
        let j = gaussian(x, 4);
        for k in 0..4 {
            let d = fd(|y| gaussian(y, 4)[k], x);
            assert!((d - j[k + 1]).abs() < 1e-8, "{k}");
        }
        assert!((j[2] - (4.0 * x * x - 2.0) * (-x * x).exp()).abs() < 1e-14);
    }

    #[test]
    fn logistic_matches_finite_differences() {
        for &u in &[-3.0, 0.0, 1.2] {
            let j = logistic(u, 4);
            assert!((j[1] - j[0] * (1.0 - j[0])).abs() < 1e-15);
            for k in 0..4 {
                let d = fd(|y| logistic(y, 4)[k], u);
                assert!((d - j[k + 1]).abs() < 1e-8, "{u} {k}");
            }
        }
    }

    #[test]
    fn reciprocal_and_products() {
        let g = [2.0, 0.5, -0.3, 0.1];
        let one = mul_scalar(&g, &recip(&g));
        assert!((one[0] - 1.0).abs() < 1e-15);
        for v in &one[1..] {
            assert!(v.abs() < 1e-15);
        }
    }

    #[test]
    fn sqrt_sincos_sech() {
        let h = [4.0, 1.0, -0.5, 0.3];
        let g = sqrt(&h);
        let sq = mul_scalar(&g, &g);
        for k in 0..4 {
            assert!((sq[k] - h[k]).abs() < 1e-14);
        }
        let th = [0.4, 1.3, -0.2, 0.7];
        let (s, c) = sin_cos(&th);
        let one: Vec<f64> = mul_scalar(&s, &s).iter().zip(mul_scalar(&c, &c)).map(|(a, b)| a + b).collect();
        assert!((one[0] - 1.0).abs() < 1e-15 && one[1..].iter().all(|v| v.abs() < 1e-14));
        for &u in &[-2.0, 0.3, 4.0] {
            let j = sech(u, 4);
            for k in 0..4 {
                let d = fd(|y| sech(y, 4)[k], u);
                assert!((d - j[k + 1]).abs() < 1e-8, "{u} {k}");
            }
        }
    }
}
