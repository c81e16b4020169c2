//! Gauss–Legendre quadrature on [-1, 1] and Legendre polynomial
//! evaluation, used by the sphere-operator spectral machinery.

use crate::error::{Result, RbmError};

/// Legendre polynomial P_j(x) by the three-term recurrence.
pub fn legendre_p(j: usize, x: f64) -> f64 {
    match j {
        0 => 1.0,
        1 => x,
        _ => {
            let mut pm1 = 1.0;
            let mut p = x;
            for k in 1..j {
                let kf = k as f64;
                let next = ((2.0 * kf + 1.0) * x * p - kf * pm1) / (kf + 1.0);
                pm1 = p;
                p = next;
            }
            p
        }
    }
}

/// (P_j(x), P_j'(x)) for the Newton iteration on the nodes.
fn legendre_p_dp(j: usize, x: f64) -> (f64, f64) {
    let p = legendre_p(j, x);
    let pm1 = if j > 0 { legendre_p(j - 1, x) } else { 0.0 };
    let dp = if j == 0 {
        0.0
    } else {
        (j as f64) * (x * p - pm1) / (x * x - 1.0)
    };
    (p, dp)
}

/// Gauss–Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(order: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if order < 1 {
        return Err(RbmError::InvalidArgument("quadrature order must be >= 1".into()));
    }
    let n = order;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = (n + 1) / 2;
    for i in 0..m {
        // Tricomi initial guess, then Newton.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_p_dp(n, x);
            dp = d;
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                let (_, d) = legendre_p_dp(n, x);
                dp = d;
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
        let (_, dp) = legendre_p_dp(n, 0.0);
        weights[n / 2] = 2.0 / (dp * dp);
    }
    Ok((nodes, weights))
}
