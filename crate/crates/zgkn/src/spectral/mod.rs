//! Separated spectral problem: angular and radial Prüfer shooting, eigenvalue
//! enumeration by winding number, and the Sommerfeld reference formula.

use serde::{Deserialize, Serialize};

use crate::error::{Result, ZgknError};

pub mod angular;
pub mod eigen;
pub mod radial;

pub use angular::{solve_angular, AngularSolution};
pub use eigen::{solve_eigenvalue, solve_level, spectrum_scan, ScanSpec, SeparatedState};

/// Diagnostics of an eigenvalue search.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ShootingReport {
    /// Radial mismatch `D(E) − 2πk` at the final iterate (radians).
    pub mismatch: f64,
    pub winding: i64,
    pub outer_evaluations: usize,
    pub angular_evaluations: usize,
    /// Energy brackets visited, in order.
    pub brackets: Vec<(f64, f64)>,
    /// Residual of the angular matching at the final λ.
    pub angular_residual: f64,
    pub converged: bool,
    pub note: String,
}

/// Dirac–Coulomb levels `E = m[1 + α²/(n − |κ| + √(κ² − α²))²]^{−1/2}` with
/// integer Dirac `κ`.
pub fn sommerfeld_energy(n: u32, kappa: i32, alpha: f64, m: f64) -> Result<f64> {
    let k = kappa.unsigned_abs();
    if kappa == 0 || n < k || (k == n && kappa > 0) {
        return Err(ZgknError::InvalidQuantumNumbers(format!("n = {n}, κ = {kappa}")));
    }
    let kf = k as f64;
    if alpha >= kf || alpha < 0.0 {
        return Err(ZgknError::InvalidQuantumNumbers(format!("α = {alpha} must lie in [0, |κ|)")));
    }
    let d = n as f64 - kf + (kf * kf - alpha * alpha).sqrt();
    Ok(m / (1.0 + (alpha / d).powi(2)).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sommerfeld_examples() {
        assert_eq!(sommerfeld_energy(1, -1, 0.0, 1.0).unwrap(), 1.0);
        let a = 1.0 / 137.036;
        let e = sommerfeld_energy(1, -1, a, 1.0).unwrap();
        assert!((e - (1.0 - a * a).sqrt()).abs() < 1e-15);
        // 2s₁/₂ and 2p₁/₂ are degenerate.
        let e2s = sommerfeld_energy(2, -1, a, 1.0).unwrap();
        let e2p = sommerfeld_energy(2, 1, a, 1.0).unwrap();
        assert!((e2s - e2p).abs() < 1e-15);
        assert!(sommerfeld_energy(1, 1, a, 1.0).is_err());
    }
}
