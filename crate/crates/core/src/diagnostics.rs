//! Scalar ingredients of the transfer-operator representation: the weight
//! 𝓕 on Herm(2), the phase function g, the A-kernel, and their stated
//! saddle-point properties.
//!
//! 𝓕 is normalized so that |𝓕| = 1 on the stationary set (the constant
//! C₊ enters with the sign that makes g(a₊) = 0 and 𝓕(diag(a,b)) =
//! e^{-g(a)/2 - g(b)/2} at vanishing off-diagonal).

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Result, RbmError};
use crate::saddle::SaddleData;

/// Point of Herm(2) in eigenvalue/off-diagonal coordinates:
/// X = [[a, (x+iy)/√2], [(x-iy)/√2, b]].
#[derive(Debug, Clone, Copy)]
pub struct Herm2Point {
    pub a: f64,
    pub b: f64,
    pub x: f64,
    pub y: f64,
}

impl Herm2Point {
    pub fn diagonal(a: f64, b: f64) -> Self {
        Self { a, b, x: 0.0, y: 0.0 }
    }

    pub fn to_matrix(&self) -> Array2<Complex64> {
        let off = Complex64::new(self.x, self.y) / 2f64.sqrt();
        let mut m = Array2::zeros((2, 2));
        m[[0, 0]] = Complex64::new(self.a, 0.0);
        m[[0, 1]] = off;
        m[[1, 0]] = off.conj();
        m[[1, 1]] = Complex64::new(self.b, 0.0);
        m
    }

    /// From a Hermitian 2x2 matrix (imaginary parts of the diagonal are
    /// required to vanish).
    pub fn from_matrix(m: &Array2<Complex64>) -> Result<Self> {
        if m.nrows() != 2 || m.ncols() != 2 {
            return Err(RbmError::InvalidArgument("Herm2Point needs a 2x2 matrix".into()));
        }
        if m[[0, 0]].im.abs() > 1e-12 || m[[1, 1]].im.abs() > 1e-12 {
            return Err(RbmError::InvalidArgument("diagonal must be real".into()));
        }
        let off = m[[0, 1]] * 2f64.sqrt();
        Ok(Self { a: m[[0, 0]].re, b: m[[1, 1]].re, x: off.re, y: off.im })
    }
}

/// g(x) = (x + iE/2)²/2 − log(x − iE/2) − C₊, principal branch.
pub fn g_of(x: f64, e: f64) -> Result<Complex64> {
    if e == 0.0 && x == 0.0 {
        return Err(RbmError::SingularPoint("g has a logarithmic singularity at x = 0, E = 0".into()));
    }
    let saddle = SaddleData::new(e)?;
    let z = Complex64::new(x, e / 2.0);
    // x - iE/2 built by subtraction so E = 0 lands on the principal side
    // of the log branch cut (+0.0 imaginary part, not -0.0).
    let zm = Complex64::new(x, 0.0) - Complex64::new(0.0, e / 2.0);
    Ok(z * z / 2.0 - zm.ln() - saddle.c_plus_norm)
}

/// 𝓕(X) and a flag marking a determinant on (or crossing) the negative
/// real axis, where the principal log branch is discontinuous.
pub fn curly_f_flagged(p: &Herm2Point, e: f64) -> Result<(Complex64, bool)> {
    let saddle = SaddleData::new(e)?;
    let off_sq = (p.x * p.x + p.y * p.y) / 2.0;

    // Tr (X + iE/2)² = (a + iE/2)² + (b + iE/2)² + 2|X₁₂|²
    let za = Complex64::new(p.a, e / 2.0);
    let zb = Complex64::new(p.b, e / 2.0);
    let tr_sq = za * za + zb * zb + 2.0 * off_sq;

    // det(X - iE/2) = (a - iE/2)(b - iE/2) - |X₁₂|²
    let det = Complex64::new(p.a, -e / 2.0) * Complex64::new(p.b, -e / 2.0) - off_sq;
    if det.norm() < 1e-300 {
        return Err(RbmError::SingularPoint("X - iΛ₀/2 is singular".into()));
    }
    let branch_flag = det.re < 0.0 && det.im.abs() < 1e-12 * det.norm();

    let exponent = -tr_sq / 4.0 + det.ln() / 2.0 + saddle.c_plus_norm;
    Ok((exponent.exp(), branch_flag))
}

pub fn curly_f(p: &Herm2Point, e: f64) -> Result<Complex64> {
    curly_f_flagged(p, e).map(|(v, _)| v)
}

/// Haar-distributed 2x2 unitary via QR of a complex Ginibre matrix.
pub fn haar_u2(rng: &mut ChaCha12Rng) -> Array2<Complex64> {
    let g = |rng: &mut ChaCha12Rng| -> Complex64 {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re, im) / 2f64.sqrt()
    };
    let a = g(rng);
    let c = g(rng);
    let b = g(rng);
    let d = g(rng);
    // Gram-Schmidt on the columns (a,c), (b,d), then fix the phases so
    // the diagonal of R is positive.
    let n1 = (a.norm_sqr() + c.norm_sqr()).sqrt();
    let q1 = (a / n1, c / n1);
    let proj = q1.0.conj() * b + q1.1.conj() * d;
    let v = (b - proj * q1.0, d - proj * q1.1);
    let n2 = (v.0.norm_sqr() + v.1.norm_sqr()).sqrt();
    let q2 = (v.0 / n2, v.1 / n2);
    let mut u = Array2::zeros((2, 2));
    u[[0, 0]] = q1.0;
    u[[1, 0]] = q1.1;
    u[[0, 1]] = q2.0;
    u[[1, 1]] = q2.1;
    u
}

/// Saddle-surface point X = a₊ U L U* for a given unitary, L = diag(1,-1).
pub fn saddle_surface_point(u: &Array2<Complex64>, a_plus: f64) -> Result<Herm2Point> {
    let l = Array2::from_diag(&Array1::from(vec![
        Complex64::new(1.0, 0.0),
        Complex64::new(-1.0, 0.0),
    ]));
    let u_dag = u.t().mapv(|v| v.conj());
    let x = u.dot(&l).dot(&u_dag).mapv(|v| v * a_plus);
    Herm2Point::from_matrix(&x)
}

/// Trapezoidal Nyström matrix of the complex-symmetric A-kernel
/// A(x,y) = (2π)^{-1/2} W e^{-g(x)/2} e^{-W²(x-y)²/2} e^{-g(y)/2},
/// symmetrized with √(w_a w_b) so eigenvalues match the weighted kernel.
pub fn a_kernel_nystrom(
    e: f64,
    w: f64,
    half_width: f64,
    nodes: usize,
) -> Result<Array2<Complex64>> {
    if nodes < 200 {
        return Err(RbmError::InvalidArgument("A-kernel Nyström needs >= 200 nodes".into()));
    }
    let saddle = SaddleData::new(e)?;
    if half_width <= saddle.a_plus {
        return Err(RbmError::InvalidArgument(format!(
            "grid half-width {half_width} must contain the saddles at ±{}",
            saddle.a_plus
        )));
    }
    let spacing = 2.0 * half_width / (nodes - 1) as f64;
    if spacing > 1.0 / (4.0 * w) {
        return Err(RbmError::InvalidArgument(format!(
            "grid spacing {spacing:.4e} exceeds 1/(4W) = {:.4e}; increase nodes",
            1.0 / (4.0 * w)
        )));
    }
    let grid: Vec<f64> = (0..nodes)
        .map(|i| -half_width + spacing * i as f64)
        .collect();
    let half_g: Vec<Complex64> = grid
        .iter()
        .map(|&x| {
            let z = Complex64::new(x, e / 2.0);
            let zm = Complex64::new(x, 0.0) - Complex64::new(0.0, e / 2.0);
            let g = z * z / 2.0 - zm.ln() - saddle.c_plus_norm;
            (-g / 2.0).exp()
        })
        .collect();
    let trap = |i: usize| if i == 0 || i == nodes - 1 { spacing / 2.0 } else { spacing };
    let prefactor = w / (2.0 * std::f64::consts::PI).sqrt();
    let mut m = Array2::zeros((nodes, nodes));
    for i in 0..nodes {
        for k in i..nodes {
            let dx = grid[i] - grid[k];
            let gauss = (-w * w * dx * dx / 2.0).exp();
            let v = half_g[i] * half_g[k] * (prefactor * gauss * (trap(i) * trap(k)).sqrt());
            m[[i, k]] = v;
            m[[k, i]] = v;
        }
    }
    Ok(m)
}

/// Convergence metadata from the power iteration.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LeadingEig {
    pub value_re: f64,
    pub value_im: f64,
    pub iterations: usize,
    pub residual: f64,
}

impl LeadingEig {
    pub fn value(&self) -> Complex64 {
        Complex64::new(self.value_re, self.value_im)
    }
}

const POWER_MAX_ITER: usize = 20_000;
const POWER_RTOL: f64 = 1e-8;

/// Largest-modulus eigenvalue by power iteration with a two-dimensional
/// Rayleigh–Ritz readout on span{v, Mv}. The advance is plain power
/// iteration (so the iterate drifts to the dominant subspace), while the
/// 2D projection supplies the eigenvalue estimate and residual; it
/// resolves equal-modulus pairs (e.g. ±λ), where a plain Rayleigh
/// quotient would oscillate forever.
pub fn leading_eigenvalue(m: &Array2<Complex64>) -> Result<LeadingEig> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(RbmError::InvalidArgument("matrix must be square".into()));
    }
    if n == 0 {
        return Err(RbmError::InvalidArgument("matrix must be nonempty".into()));
    }
    if n == 1 {
        let z = m[[0, 0]];
        return Ok(LeadingEig { value_re: z.re, value_im: z.im, iterations: 0, residual: 0.0 });
    }
    // Fixed pseudo-random start so results are reproducible; incommensurate
    // phases avoid starting orthogonal to the leading eigenvector.
    let mut v: Array1<Complex64> = Array1::from_iter((0..n).map(|i| {
        let t = 0.7548776662466927 * (i as f64 + 1.0);
        Complex64::new(t.cos() + 0.3, t.sin())
    }));
    let norm = |u: &Array1<Complex64>| u.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let dot = |a: &Array1<Complex64>, b: &Array1<Complex64>| -> Complex64 {
        a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
    };
    let nv = norm(&v);
    v.mapv_inplace(|z| z / nv);

    let mut residual = f64::INFINITY;
    for it in 1..=POWER_MAX_ITER {
        let w = m.dot(&v);
        let h11 = dot(&v, &w);
        let r = &w - &v.mapv(|z| z * h11);
        let beta = norm(&r);
        let scale = norm(&w).max(1.0);
        if beta <= 1e-15 * scale {
            // v is an eigenvector already.
            return Ok(LeadingEig {
                value_re: h11.re,
                value_im: h11.im,
                iterations: it,
                residual: beta / h11.norm().max(f64::MIN_POSITIVE),
            });
        }
        let q2 = r.mapv(|z| z / beta);
        let mq2 = m.dot(&q2);
        // Projected 2x2 matrix in the orthonormal basis {v, q2}.
        let h12 = dot(&v, &mq2);
        let h21 = Complex64::new(beta, 0.0);
        let h22 = dot(&q2, &mq2);
        // Eigenvalues of [[h11, h12], [h21, h22]].
        let tr = h11 + h22;
        let disc = ((h11 - h22) * (h11 - h22) + 4.0 * h12 * h21).sqrt();
        let l1 = (tr + disc) / 2.0;
        let l2 = (tr - disc) / 2.0;
        let lambda = if l1.norm() >= l2.norm() { l1 } else { l2 };
        // Ritz vector: null vector of (H - lambda), picked from the larger row.
        let (y1, y2) = if (lambda - h11).norm() >= (lambda - h22).norm() {
            (h12, lambda - h11)
        } else {
            (lambda - h22, h21)
        };
        let ny = (y1.norm_sqr() + y2.norm_sqr()).sqrt();
        let (y1, y2) = (y1 / ny, y2 / ny);
        let u: Array1<Complex64> = (0..n)
            .map(|i| v[i] * y1 + q2[i] * y2)
            .collect();
        let mu: Array1<Complex64> = (0..n)
            .map(|i| w[i] * y1 + mq2[i] * y2)
            .collect();
        let res = norm(&(&mu - &u.mapv(|z| z * lambda)));
        residual = res / lambda.norm().max(f64::MIN_POSITIVE);
        if residual <= POWER_RTOL {
            return Ok(LeadingEig {
                value_re: lambda.re,
                value_im: lambda.im,
                iterations: it,
                residual,
            });
        }
        let nw = norm(&w);
        if nw == 0.0 {
            // M annihilated v: leading eigenvalue is 0.
            return Ok(LeadingEig { value_re: 0.0, value_im: 0.0, iterations: it, residual: 0.0 });
        }
        v = w.mapv(|z| z / nw);
    }
    Err(RbmError::NonConvergence {
        what: "power iteration".into(),
        iterations: POWER_MAX_ITER,
        residual,
    })
}

/// JSON-ready diagnostics report for one (E, W).
#[derive(Debug, Serialize)]
pub struct DiagnosticsReport {
    pub saddle: SaddleData,
    pub f_residual_x_plus: f64,
    pub f_residual_x_minus: f64,
    pub f_residual_surface_max: f64,
    pub branch_flags: usize,
    pub a_kernel_leading: LeadingEig,
    pub a_kernel_nodes: usize,
}

pub fn diagnostics_report(e: f64, w: f64, haar_samples: usize) -> Result<DiagnosticsReport> {
    use crate::ensemble::{stream_rng, SeedRecord};

    let saddle = SaddleData::new(e)?;
    let f_plus = curly_f(&Herm2Point::diagonal(saddle.a_plus, saddle.a_plus), e)?;
    let f_minus = curly_f(&Herm2Point::diagonal(saddle.a_minus, saddle.a_minus), e)?;

    let mut rng = stream_rng(SeedRecord { seed: 0x5eed, stream: 0 });
    let mut surface_max = 0.0f64;
    let mut branch_flags = 0usize;
    for _ in 0..haar_samples {
        let u = haar_u2(&mut rng);
        let p = saddle_surface_point(&u, saddle.a_plus)?;
        let (f, flag) = curly_f_flagged(&p, e)?;
        surface_max = surface_max.max((f.norm() - 1.0).abs());
        branch_flags += usize::from(flag);
    }

    let nodes = (200usize).max((24.0 * w) as usize + 1);
    let a = a_kernel_nystrom(e, w, 3.0, nodes)?;
    let leading = leading_eigenvalue(&a)?;

    Ok(DiagnosticsReport {
        saddle,
        f_residual_x_plus: (f_plus.norm() - 1.0).abs(),
        f_residual_x_minus: (f_minus.norm() - 1.0).abs(),
        f_residual_surface_max: surface_max,
        branch_flags,
        a_kernel_leading: leading,
        a_kernel_nodes: nodes,
    })
}
