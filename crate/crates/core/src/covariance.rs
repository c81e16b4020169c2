//! Band covariance profile J = (-W^2 Δ + 1)^{-1} on the 1D lattice [1, n]
//! with Neumann boundary conditions.
//!
//! The Neumann rows are fixed so that Δ·1 = 0, which forces every row sum
//! of J to equal 1 (the total variance per lattice row).

use ndarray::Array2;
use serde::Serialize;

use crate::error::{Result, RbmError};

/// Lattice parameters of the band ensemble.
#[derive(Debug, Clone, Serialize)]
pub struct LatticeSpec {
    pub n: usize,
    pub w: f64,
    /// Constant in n = C_* W^2, recorded for provenance only.
    pub c_star: Option<f64>,
}

impl LatticeSpec {
    pub fn new(n: usize, w: f64) -> Result<Self> {
        if n < 1 {
            return Err(RbmError::InvalidArgument("lattice size n must be >= 1".into()));
        }
        if !(w >= 1.0) {
            return Err(RbmError::InvalidArgument(format!(
                "bandwidth W must be >= 1, got {w}"
            )));
        }
        Ok(Self { n, w, c_star: None })
    }

    pub fn with_c_star(n: usize, w: f64, c_star: f64) -> Result<Self> {
        let mut spec = Self::new(n, w)?;
        if (n as f64 - c_star * w * w).abs() >= 1.0 {
            return Err(RbmError::InvalidArgument(format!(
                "n = {n} is not consistent with C_* W^2 = {}",
                c_star * w * w
            )));
        }
        spec.c_star = Some(c_star);
        Ok(spec)
    }
}

/// Dense covariance profile J with its lattice parameters.
#[derive(Debug, Clone)]
pub struct CovarianceProfile {
    spec: LatticeSpec,
    entries: Array2<f64>,
}

/// Discrete Neumann Laplacian on [1, n]: tridiagonal with Δ_{i,i±1} = 1,
/// Δ_{ii} = -2 in the interior and Δ_{11} = Δ_{nn} = -1.
pub fn build_neumann_laplacian(n: usize) -> Result<Array2<f64>> {
    if n < 1 {
        return Err(RbmError::InvalidArgument("n must be >= 1".into()));
    }
    let mut d = Array2::zeros((n, n));
    for i in 0..n {
        let mut diag = 0.0;
        if i > 0 {
            d[[i, i - 1]] = 1.0;
            diag -= 1.0;
        }
        if i + 1 < n {
            d[[i, i + 1]] = 1.0;
            diag -= 1.0;
        }
        d[[i, i]] = diag;
    }
    Ok(d)
}

/// Prefactored symmetric positive definite tridiagonal matrix
/// -W^2 Δ + 1, solved by the Thomas algorithm (one O(n) pass per RHS).
struct TridiagFactors {
    /// Modified diagonal after forward elimination.
    denom: Vec<f64>,
    /// Elimination multipliers sub_i / denom_{i-1}.
    mult: Vec<f64>,
    /// Constant off-diagonal value (-W^2).
    off: f64,
}

impl TridiagFactors {
    fn new(n: usize, w: f64) -> Self {
        let w2 = w * w;
        let off = -w2;
        let diag = |i: usize| -> f64 {
            if n == 1 {
                1.0
            } else if i == 0 || i == n - 1 {
                1.0 + w2
            } else {
                1.0 + 2.0 * w2
            }
        };
        let mut denom = vec![0.0; n];
        let mut mult = vec![0.0; n];
        denom[0] = diag(0);
        for i in 1..n {
            mult[i] = off / denom[i - 1];
            denom[i] = diag(i) - mult[i] * off;
        }
        Self { denom, mult, off }
    }

    /// Solve (-W^2 Δ + 1) x = rhs in place.
    fn solve(&self, rhs: &mut [f64]) {
        let n = rhs.len();
        for i in 1..n {
            let m = self.mult[i];
            rhs[i] -= m * rhs[i - 1];
        }
        rhs[n - 1] /= self.denom[n - 1];
        for i in (0..n - 1).rev() {
            rhs[i] = (rhs[i] - self.off * rhs[i + 1]) / self.denom[i];
        }
    }
}

/// Compute J = (-W^2 Δ + 1)^{-1} column by column.
pub fn build_covariance(spec: LatticeSpec) -> Result<CovarianceProfile> {
    let n = spec.n;
    let factors = TridiagFactors::new(n, spec.w);
    let mut entries = Array2::zeros((n, n));
    let mut col = vec![0.0; n];
    for k in 0..n {
        col.iter_mut().for_each(|v| *v = 0.0);
        col[k] = 1.0;
        factors.solve(&mut col);
        for i in 0..n {
            entries[[i, k]] = col[i];
        }
    }
    // Symmetrize away the last bits of solver asymmetry.
    for i in 0..n {
        for k in 0..i {
            let s = 0.5 * (entries[[i, k]] + entries[[k, i]]);
            entries[[i, k]] = s;
            entries[[k, i]] = s;
        }
    }
    Ok(CovarianceProfile { spec, entries })
}

impl CovarianceProfile {
    pub fn n(&self) -> usize {
        self.spec.n
    }

    pub fn spec(&self) -> &LatticeSpec {
        &self.spec
    }

    pub fn entries(&self) -> &Array2<f64> {
        &self.entries
    }

    /// Largest deviation of any row sum from 1.
    pub fn row_sum_max_err(&self) -> f64 {
        let n = self.spec.n;
        (0..n)
            .map(|i| ((0..n).map(|k| self.entries[[i, k]]).sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Off-diagonal decay: for each offset k, max_i J_{i,i+k} / J_{i,i}.
    pub fn decay_profile(&self) -> Vec<(usize, f64)> {
        let n = self.spec.n;
        (0..n)
            .map(|k| {
                let r = (0..n - k)
                    .map(|i| self.entries[[i, i + k]] / self.entries[[i, i]])
                    .fold(f64::NEG_INFINITY, f64::max);
                (k, if k == 0 { 1.0 } else { r })
            })
            .collect()
    }
}
