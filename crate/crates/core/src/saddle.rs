//! Energy-derived saddle constants shared by the spectral-limit and
//! transfer-diagnostics modules.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Result, RbmError};

/// Semicircle density ρ(E) = (2π)⁻¹ √(4 − E²).
pub fn semicircle_rho(e: f64) -> Result<f64> {
    if e.abs() > 2.0 {
        return Err(RbmError::DomainError(format!(
            "semicircle density needs |E| <= 2, got {e}"
        )));
    }
    Ok((4.0 - e * e).sqrt() / (2.0 * std::f64::consts::PI))
}

/// Constants derived from the spectral center E:
/// saddle eigenvalues a± = ±√(1 − E²/4), curvatures c±, the
/// normalization constant C₊ of g, and the saddle coordinate
/// t* = (a₊ − a₋)² = 4π²ρ(E)².
#[derive(Debug, Clone, Serialize)]
pub struct SaddleData {
    pub e: f64,
    pub rho: f64,
    pub a_plus: f64,
    pub a_minus: f64,
    pub curv_plus: Complex64,
    pub curv_minus: Complex64,
    /// C₊ = (a₊ + iE/2)²/2 − log(a₊ − iE/2).
    pub c_plus_norm: Complex64,
    pub t_star: f64,
}

impl SaddleData {
    pub fn new(e: f64) -> Result<Self> {
        if e.abs() >= 2.0 {
            return Err(RbmError::DomainError(format!(
                "saddle data needs |E| < 2, got {e}"
            )));
        }
        let rho = semicircle_rho(e)?;
        let a_plus = (1.0 - e * e / 4.0).sqrt();
        let a_minus = -a_plus;
        let root = (4.0 - e * e).sqrt();
        let curv_plus = Complex64::new(a_plus * root / 2.0, a_plus * e / 2.0);
        let curv_minus = Complex64::new(a_plus * root / 2.0, -a_plus * e / 2.0);
        let z = Complex64::new(a_plus, e / 2.0);
        let c_plus_norm = z * z / 2.0 - Complex64::new(a_plus, -e / 2.0).ln();
        let t_star = (a_plus - a_minus).powi(2);
        Ok(Self { e, rho, a_plus, a_minus, curv_plus, curv_minus, c_plus_norm, t_star })
    }

    /// Effective crossover constant C* = C_* / (2πρ)² = C_* / t*.
    pub fn c_star_eff(&self, c_star: f64) -> f64 {
        c_star / self.t_star
    }
}
