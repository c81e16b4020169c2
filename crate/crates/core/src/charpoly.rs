//! Monte Carlo estimation of the normalized correlation function of
//! characteristic polynomials,
//!
//!   F̄₂(ξ) = E{det(x₁-H) det(x₂-H)} / E{det(E-H)²},
//!   x₁,₂ = E ± ξ/(2 n ρ(E)),
//!
//! as a ratio of means over a shared sample set. Eigenvalues are computed
//! once per draw and reused for every ξ and for the denominator point, and
//! all products are accumulated in log space.

use ndarray::Array2;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::accumulator::RatioAccumulator;
use crate::covariance::CovarianceProfile;
use crate::ensemble::{stream_rng, RbmSample, RbmSampler, RngStreamPolicy, SeedRecord};
use crate::error::{Result, RbmError};
use crate::saddle::semicircle_rho;
use crate::sphere::limit_formula;

/// Spectral window: center E, its semicircle density, and the
/// dimensionless distances ξ at which F̄₂ is evaluated.
#[derive(Debug, Clone, Serialize)]
pub struct EnergyWindow {
    pub e: f64,
    pub rho: f64,
    pub xi_grid: Vec<f64>,
    pub n: usize,
}

impl EnergyWindow {
    pub fn new(e: f64, xi_grid: Vec<f64>, n: usize) -> Result<Self> {
        let rho = semicircle_rho(e)?;
        if rho <= 0.0 {
            return Err(RbmError::DomainError(
                "spectral center must lie strictly inside (-2, 2)".into(),
            ));
        }
        if n == 0 {
            return Err(RbmError::InvalidArgument("n must be >= 1".into()));
        }
        let mut grid = xi_grid;
        grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for &xi in &grid {
            let delta = xi / (2.0 * n as f64 * rho);
            for x in [e + delta, e - delta] {
                if x.abs() >= 2.0 {
                    return Err(RbmError::DomainError(format!(
                        "evaluation point {x} for xi={xi} leaves (-2, 2)"
                    )));
                }
            }
        }
        Ok(Self { e, rho, xi_grid: grid, n })
    }

    /// Evaluation points (x₁, x₂) for one ξ. ξ = 0 returns (E, E) exactly.
    pub fn points(&self, xi: f64) -> (f64, f64) {
        let delta = xi / (2.0 * self.n as f64 * self.rho);
        (self.e + delta, self.e - delta)
    }
}

/// Eigenvalues of a Hermitian matrix, ascending. Calls zheev directly
/// (eigenvalues only): this is the hot path of the Monte Carlo loop.
pub fn hermitian_eigenvalues(h: &Array2<Complex64>) -> Result<Vec<f64>> {
    let n = h.nrows();
    if n != h.ncols() {
        return Err(RbmError::InvalidArgument("matrix must be square".into()));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    // Row-major buffer read column-major by LAPACK is the transpose; for a
    // Hermitian matrix that is the conjugate, with identical eigenvalues.
    let mut a: Vec<lapack::c64> = h.iter().map(|z| lapack::c64::new(z.re, z.im)).collect();
    let mut eigs = vec![0.0f64; n];
    let mut rwork = vec![0.0f64; (3 * n - 2).max(1)];
    let mut info = 0i32;
    // Workspace query, then the real call.
    let mut work_len = [lapack::c64::new(0.0, 0.0)];
    unsafe {
        lapack::zheev(
            b'N', b'L', n as i32, &mut a, n as i32, &mut eigs,
            &mut work_len, -1, &mut rwork, &mut info,
        );
    }
    if info != 0 {
        return Err(RbmError::Numerical(format!("zheev workspace query failed: info={info}")));
    }
    let lwork = (work_len[0].re as usize).max(2 * n.saturating_sub(1)).max(1);
    let mut work = vec![lapack::c64::new(0.0, 0.0); lwork];
    unsafe {
        lapack::zheev(
            b'N', b'L', n as i32, &mut a, n as i32, &mut eigs,
            &mut work, lwork as i32, &mut rwork, &mut info,
        );
    }
    if info != 0 {
        return Err(RbmError::Numerical(format!("Hermitian eigensolve failed: info={info}")));
    }
    Ok(eigs)
}

/// log|∏_k (x1-λ_k)(x2-λ_k)| and the sign of the product.
pub fn log_det_pair(eigs: &[f64], x1: f64, x2: f64) -> (f64, f64) {
    let mut log_mag = 0.0;
    let mut sign = 1.0;
    for &lambda in eigs {
        for x in [x1, x2] {
            let d = x - lambda;
            log_mag += d.abs().ln();
            if d < 0.0 {
                sign = -sign;
            }
        }
    }
    (log_mag, sign)
}

/// Convenience wrapper over one sample: eigensolve + log product.
pub fn charpoly_log_pair(sample: &RbmSample, x1: f64, x2: f64) -> Result<(f64, f64)> {
    let eigs = hermitian_eigenvalues(&sample.h)?;
    Ok(log_det_pair(&eigs, x1, x2))
}

/// Monte Carlo estimate of F̄₂ at one ξ.
#[derive(Debug, Clone, Serialize)]
pub struct F2Estimate {
    pub xi: f64,
    pub value: f64,
    pub stderr: f64,
    pub n_samples: usize,
    pub ess_ratio: f64,
    pub seed: u64,
    pub streams: usize,
}

/// Full output of an estimation run, including dropped-sample diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct FbarReport {
    pub estimates: Vec<F2Estimate>,
    pub dropped: usize,
    pub warnings: Vec<String>,
}

struct StreamPartial {
    accs: Vec<RatioAccumulator>,
    dropped: usize,
}

fn run_stream(
    sampler: &RbmSampler,
    window: &EnergyWindow,
    policy: RngStreamPolicy,
    stream: u64,
    samples: usize,
) -> StreamPartial {
    let mut rng = stream_rng(SeedRecord { seed: policy.master_seed, stream });
    let mut accs = vec![RatioAccumulator::new(); window.xi_grid.len()];
    let mut dropped = 0usize;
    let mut h = Array2::zeros((sampler.n(), sampler.n()));
    for _ in 0..samples {
        sampler.draw_into(&mut rng, &mut h);
        let eigs = match hermitian_eigenvalues(&h) {
            Ok(e) => e,
            Err(_) => {
                dropped += 1;
                continue;
            }
        };
        let (log_d, sign_d) = log_det_pair(&eigs, window.e, window.e);
        for (acc, &xi) in accs.iter_mut().zip(&window.xi_grid) {
            let (x1, x2) = window.points(xi);
            let (log_n, sign_n) = log_det_pair(&eigs, x1, x2);
            acc.push(log_n, sign_n, log_d, sign_d);
        }
    }
    StreamPartial { accs, dropped }
}

/// Ratio-of-means estimator over `n_samples` draws split across the
/// policy's streams. Deterministic given (master_seed, stream_count),
/// independent of worker-thread scheduling: each stream owns its RNG and
/// partial accumulators, merged in stream order.
pub fn estimate_fbar(
    j: &CovarianceProfile,
    window: &EnergyWindow,
    n_samples: usize,
    policy: RngStreamPolicy,
) -> Result<FbarReport> {
    if n_samples < 100 {
        return Err(RbmError::InvalidArgument("need at least 100 samples".into()));
    }
    if window.n != j.n() {
        return Err(RbmError::InvalidArgument(format!(
            "window n = {} does not match covariance n = {}",
            window.n,
            j.n()
        )));
    }
    let sampler = RbmSampler::new(j);
    let streams = policy.stream_count;
    let base = n_samples / streams;
    let extra = n_samples % streams;

    let partials: Vec<StreamPartial> = (0..streams as u64)
        .into_par_iter()
        .map(|s| {
            let count = base + usize::from((s as usize) < extra);
            run_stream(&sampler, window, policy, s, count)
        })
        .collect();

    let mut merged = vec![RatioAccumulator::new(); window.xi_grid.len()];
    let mut dropped = 0usize;
    for p in &partials {
        dropped += p.dropped;
        for (m, a) in merged.iter_mut().zip(&p.accs) {
            m.merge(a);
        }
    }

    let kept = n_samples - dropped;
    if kept == 0 {
        return Err(RbmError::InsufficientData(
            "every sample was discarded by the eigensolver".into(),
        ));
    }
    let mut warnings = Vec::new();
    if dropped as f64 > 0.001 * n_samples as f64 {
        warnings.push(format!(
            "{dropped} of {n_samples} samples dropped (> 0.1%); estimates may be biased"
        ));
    }
    let estimates = merged
        .iter()
        .zip(&window.xi_grid)
        .map(|(acc, &xi)| F2Estimate {
            xi,
            value: acc.ratio(),
            stderr: acc.stderr(),
            n_samples: acc.count(),
            ess_ratio: acc.ess_ratio(),
            seed: policy.master_seed,
            streams,
        })
        .collect();
    Ok(FbarReport { estimates, dropped, warnings })
}

/// One row of the critical-regime comparison table.
#[derive(Debug, Clone, Serialize)]
pub struct CrossoverRow {
    pub xi: f64,
    pub mc_value: f64,
    pub mc_stderr: f64,
    pub limit_value: f64,
}

/// Joint MC-vs-analytic-limit experiment at n = round(C_* W²).
pub fn crossover_experiment(
    c_star: f64,
    w: f64,
    e: f64,
    xi_grid: Vec<f64>,
    n_samples: usize,
    policy: RngStreamPolicy,
) -> Result<(Vec<CrossoverRow>, FbarReport)> {
    let n = (c_star * w * w).round() as usize;
    if n < 8 {
        return Err(RbmError::InvalidArgument(format!(
            "n = round(C_* W²) = {n} is below the minimum of 8"
        )));
    }
    let spec = crate::covariance::LatticeSpec::with_c_star(n, w, c_star)?;
    let j = crate::covariance::build_covariance(spec)?;
    let window = EnergyWindow::new(e, xi_grid, n)?;
    let report = estimate_fbar(&j, &window, n_samples, policy)?;
    let rows = report
        .estimates
        .iter()
        .map(|est| {
            let lim = limit_formula(c_star, e, est.xi, 16)?;
            Ok(CrossoverRow {
                xi: est.xi,
                mc_value: est.value,
                mc_stderr: est.stderr,
                limit_value: lim.value_re,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((rows, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::{build_covariance, LatticeSpec};
    use crate::ensemble::sample_rbm;

    #[test]
    fn log_pair_explicit_cases() {
        // H = 0 (n=2), x1 = x2 = 1: det(1)² = 1.
        let eigs = [0.0, 0.0];
        let (lm, sign) = log_det_pair(&eigs, 1.0, 1.0);
        assert_eq!(lm, 0.0);
        assert_eq!(sign, 1.0);

        // H = diag(1, -1), x1 = 2, x2 = 0: product -3.
        let eigs = [1.0, -1.0];
        let (lm, sign) = log_det_pair(&eigs, 2.0, 0.0);
        assert!((lm - 3f64.ln()).abs() < 1e-14);
        assert_eq!(sign, -1.0);
    }

    // LU-determinant oracle, independent of the eigensolver path.
    fn lu_log_det(m: &Array2<Complex64>) -> (f64, f64) {
        let n = m.nrows();
        let mut a = m.clone();
        let mut log_mag = 0.0;
        let mut phase = Complex64::new(1.0, 0.0);
        for k in 0..n {
            let mut piv = k;
            for r in k + 1..n {
                if a[[r, k]].norm() > a[[piv, k]].norm() {
                    piv = r;
                }
            }
            if piv != k {
                for c in 0..n {
                    let tmp = a[[k, c]];
                    a[[k, c]] = a[[piv, c]];
                    a[[piv, c]] = tmp;
                }
                phase = -phase;
            }
            let d = a[[k, k]];
            log_mag += d.norm().ln();
            phase *= d / d.norm();
            for r in k + 1..n {
                let f = a[[r, k]] / d;
                for c in k..n {
                    let v = a[[k, c]];
                    a[[r, c]] = a[[r, c]] - f * v;
                }
            }
        }
        (log_mag, phase.re.signum())
    }

    #[test]
    fn eigenvalue_route_matches_lu_oracle() {
        let j = build_covariance(LatticeSpec::new(8, 2.0).unwrap()).unwrap();
        for stream in 0..5 {
            let s = sample_rbm(&j, SeedRecord { seed: 77, stream });
            let (x1, x2) = (0.37, -0.81);
            let (lm, sign) = charpoly_log_pair(&s, x1, x2).unwrap();
            let eye = Array2::<Complex64>::eye(8);
            let m1 = eye.mapv(|v| v * Complex64::new(x1, 0.0)) - &s.h;
            let m2 = eye.mapv(|v| v * Complex64::new(x2, 0.0)) - &s.h;
            let (l1, s1) = lu_log_det(&m1);
            let (l2, s2) = lu_log_det(&m2);
            assert!((lm - (l1 + l2)).abs() / lm.abs().max(1.0) < 1e-8);
            assert_eq!(sign, s1 * s2);
        }
    }

    #[test]
    fn xi_zero_estimate_is_exactly_one() {
        let j = build_covariance(LatticeSpec::new(8, 2.0).unwrap()).unwrap();
        let window = EnergyWindow::new(0.0, vec![0.0, 0.5], 8).unwrap();
        let policy = RngStreamPolicy::new(11, 4).unwrap();
        let report = estimate_fbar(&j, &window, 200, policy).unwrap();
        let at0 = &report.estimates[0];
        assert_eq!(at0.value, 1.0);
        assert_eq!(at0.stderr, 0.0);
    }

    #[test]
    fn estimates_are_deterministic_across_thread_pools() {
        let j = build_covariance(LatticeSpec::new(8, 2.0).unwrap()).unwrap();
        let window = EnergyWindow::new(0.0, vec![0.5, 1.0], 8).unwrap();
        let policy = RngStreamPolicy::new(99, 7).unwrap();
        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            pool.install(|| estimate_fbar(&j, &window, 300, policy).unwrap())
        };
        let a = run(1);
        let b = run(3);
        for (x, y) in a.estimates.iter().zip(&b.estimates) {
            assert_eq!(x.value.to_bits(), y.value.to_bits());
            assert_eq!(x.stderr.to_bits(), y.stderr.to_bits());
        }
    }

    #[test]
    fn mirrored_xi_grid_agrees_at_e0() {
        let j = build_covariance(LatticeSpec::new(16, 4.0).unwrap()).unwrap();
        let window = EnergyWindow::new(0.0, vec![-1.0, 1.0], 16).unwrap();
        let policy = RngStreamPolicy::new(5, 4).unwrap();
        let report = estimate_fbar(&j, &window, 4000, policy).unwrap();
        let a = &report.estimates[0];
        let b = &report.estimates[1];
        let tol = 3.0 * (a.stderr.hypot(b.stderr));
        assert!((a.value - b.value).abs() <= tol, "{} vs {}", a.value, b.value);
    }

    #[test]
    fn window_validation() {
        assert!(EnergyWindow::new(2.5, vec![0.0], 8).is_err());
        assert!(EnergyWindow::new(2.0, vec![0.0], 8).is_err());
        // xi so large that x1 leaves (-2, 2) at n = 1.
        assert!(EnergyWindow::new(1.9, vec![10.0], 1).is_err());
        let w = EnergyWindow::new(0.0, vec![1.0, -1.0, 0.0], 16).unwrap();
        assert_eq!(w.xi_grid, vec![-1.0, 0.0, 1.0]);
        let (x1, x2) = w.points(0.0);
        assert_eq!(x1, 0.0);
        assert_eq!(x2, 0.0);
    }
}
