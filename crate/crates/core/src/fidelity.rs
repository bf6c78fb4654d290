//! State fidelity, state-averaged fidelity and power-law fits.

use crate::error::{Error, Result};
use crate::ops::{logm_unitary, trace, Mat};
use crate::partition::{comp_block, q_apply, HilbertPartition};

/// |⟨target|U|initial⟩|².
pub fn state_fidelity(u: &Mat, initial: usize, target: usize) -> Result<f64> {
    let n = u.nrows();
    for idx in [initial, target] {
        if idx >= n {
            return Err(Error::Index { index: idx, dim: n });
        }
    }
    Ok(u[(target, initial)].norm_sqr().min(1.0))
}

/// Pedersen average over computational states:
/// (Tr MM† + |Tr M|²) / (Q(Q+1)) with M the computational block.
pub fn avg_fidelity(u_err: &Mat, partition: &HilbertPartition) -> f64 {
    let q = partition.n_comp();
    let m = comp_block(u_err, q);
    let tmm = trace(&(&m * m.adjoint())).re;
    let tr = trace(&m).norm_sqr();
    ((tmm + tr) / (q * (q + 1)) as f64).clamp(0.0, 1.0)
}

/// Full-space convention (N + |Tr U|²) / (N(N+1)).
pub fn avg_fidelity_full(u_err: &Mat) -> f64 {
    let n = u_err.nrows() as f64;
    ((n + trace(u_err).norm_sqr()) / (n * (n + 1.0))).clamp(0.0, 1.0)
}

/// F̄ for an error generator Ξ: (N + |Tr exp(QΞ)|²) / (N(N+1)).
pub fn avg_fidelity_from_generator(xi: &Mat, partition: &HilbertPartition) -> f64 {
    avg_fidelity_full(&crate::ops::expm(&q_apply(xi, partition.n_comp())))
}

/// Average gate fidelity of a propagator against a target on the
/// computational block: M = U_target† · P U P.
pub fn gate_fidelity(u: &Mat, target: &Mat, partition: &HilbertPartition) -> f64 {
    let q = partition.n_comp();
    let m = target.adjoint() * comp_block(u, q);
    let tmm = trace(&(&m * m.adjoint())).re;
    let tr = trace(&m).norm_sqr();
    ((tmm + tr) / (q * (q + 1)) as f64).clamp(0.0, 1.0)
}

/// Q-projected effective generator of an error propagator.
pub fn leakage_generator(u_err: &Mat, partition: &HilbertPartition) -> Mat {
    q_apply(&logm_unitary(u_err), partition.n_comp())
}

/// Least-squares power law error ≈ A·εᵖ.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingFit {
    pub exponent: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub samples: Vec<(f64, f64)>,
}

impl ScalingFit {
    /// At least four samples spanning a decade with r² ≥ 0.98.
    pub fn conclusive(&self) -> bool {
        let lo = self.samples.iter().map(|s| s.0).fold(f64::INFINITY, f64::min);
        let hi = self.samples.iter().map(|s| s.0).fold(0.0, f64::max);
        self.samples.len() >= 4 && hi / lo >= 10.0 - 1e-9 && self.r_squared >= 0.98
    }
}

pub fn scaling_exponent(samples: &[(f64, f64)]) -> Result<ScalingFit> {
    if samples.len() < 4 {
        return Err(Error::FitSamples(samples.len()));
    }
    if samples.iter().any(|&(x, y)| !(x > 0.0) || !(y > 0.0)) {
        return Err(Error::FitNonPositive);
    }
    let pts: Vec<(f64, f64)> = samples.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    Ok(ScalingFit { exponent: slope, intercept, r_squared, samples: samples.to_vec() })
}

/// Drop samples whose error is within `factor` of `floor`.
pub fn above_floor(samples: &[(f64, f64)], floor: f64, factor: f64) -> Vec<(f64, f64)> {
    samples.iter().copied().filter(|s| s.1 > factor * floor).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ops::{c, diag, eye, ket_bra, r};

    #[test]
    fn state_fidelity_basics() {
        let swap = ket_bra(2, 0, 1) + ket_bra(2, 1, 0);
        assert_eq!(state_fidelity(&swap, 0, 1).unwrap(), 1.0);
        assert_eq!(state_fidelity(&eye(2), 0, 1).unwrap(), 0.0);
        assert!(state_fidelity(&eye(2), 0, 2).is_err());
    }

    #[test]
    fn avg_fidelity_identity_and_phase() {
        let p = HilbertPartition::numbered(3, 2).unwrap();
        assert!((avg_fidelity(&eye(3), &p) - 1.0).abs() < 1e-15);
        let ph = c(0.3_f64.cos(), 0.3_f64.sin());
        let u = diag(&[ph, ph, c(0.0, 1.0)]);
        assert!((avg_fidelity(&u, &p) - 1.0).abs() < 1e-15);
        let u = diag(&[r(1.0), r(-1.0), r(1.0)]);
        assert!(avg_fidelity(&u, &p) < 0.5);
    }

    #[test]
    fn fit_exact_power_law() {
        let s: Vec<(f64, f64)> = [1.0, 0.5, 0.25, 0.125, 0.0625].iter().map(|&x: &f64| (x, 7.0 * x.powi(3))).collect();
        let f = scaling_exponent(&s).unwrap();
        assert!((f.exponent - 3.0).abs() < 1e-12);
        assert!((f.intercept - 7.0_f64.ln()).abs() < 1e-12);
        assert!(f.conclusive());
        let s: Vec<(f64, f64)> = [1.0, 0.1, 0.01, 0.001].iter().map(|&x| (x, 2.0)).collect();
        assert!(scaling_exponent(&s).unwrap().exponent.abs() < 1e-12);
        assert!(scaling_exponent(&s[..3]).is_err());
        assert!(scaling_exponent(&[(1.0, 0.0), (2.0, 1.0), (3.0, 1.0), (4.0, 1.0)]).is_err());
    }
}
