//! Sampling of Hermitian band matrices with entry covariance
//! E{H_ij H_lk} = δ_ik δ_jl J_ij.
//!
//! Convention: off-diagonal entries are complex Gaussian with
//! E|H_ij|^2 = J_ij and E H_ij^2 = 0; diagonal entries are real Gaussian
//! with variance J_ii. Streams are ChaCha12 substreams keyed by
//! (master_seed, stream), so parallel sampling is reproducible
//! independent of thread scheduling.

use ndarray::Array2;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::covariance::CovarianceProfile;
use crate::error::{Result, RbmError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SeedRecord {
    pub seed: u64,
    pub stream: u64,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct RngStreamPolicy {
    pub master_seed: u64,
    pub stream_count: usize,
}

impl RngStreamPolicy {
    pub fn new(master_seed: u64, stream_count: usize) -> Result<Self> {
        if stream_count == 0 {
            return Err(RbmError::InvalidArgument("stream_count must be >= 1".into()));
        }
        Ok(Self { master_seed, stream_count })
    }
}

/// Deterministic substream generator for a (seed, stream) pair.
pub fn stream_rng(record: SeedRecord) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(record.seed);
    rng.set_stream(record.stream);
    rng
}

/// One Hermitian draw from the band ensemble.
#[derive(Debug, Clone)]
pub struct RbmSample {
    pub h: Array2<Complex64>,
    pub seed_record: SeedRecord,
}

/// Reusable sampler holding the precomputed entry scales
/// sqrt(J_ij / 2) (off-diagonal) and sqrt(J_ii) (diagonal).
pub struct RbmSampler {
    n: usize,
    scale_off: Array2<f64>,
    scale_diag: Vec<f64>,
}

impl RbmSampler {
    pub fn new(j: &CovarianceProfile) -> Self {
        let n = j.n();
        let e = j.entries();
        let scale_off = e.mapv(|v| (v / 2.0).sqrt());
        let scale_diag = (0..n).map(|i| e[[i, i]].sqrt()).collect();
        Self { n, scale_off, scale_diag }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Draw into a preallocated n x n buffer. The draw order is fixed
    /// (diagonal first, then the upper triangle row by row), so a stream
    /// produces the same matrix regardless of caller.
    pub fn draw_into(&self, rng: &mut ChaCha12Rng, h: &mut Array2<Complex64>) {
        let n = self.n;
        for i in 0..n {
            let g: f64 = StandardNormal.sample(rng);
            h[[i, i]] = Complex64::new(self.scale_diag[i] * g, 0.0);
        }
        for i in 0..n {
            for k in i + 1..n {
                let g1: f64 = StandardNormal.sample(rng);
                let g2: f64 = StandardNormal.sample(rng);
                let s = self.scale_off[[i, k]];
                let v = Complex64::new(s * g1, s * g2);
                h[[i, k]] = v;
                h[[k, i]] = v.conj();
            }
        }
    }

    pub fn draw(&self, rng: &mut ChaCha12Rng) -> Array2<Complex64> {
        let mut h = Array2::zeros((self.n, self.n));
        self.draw_into(rng, &mut h);
        h
    }
}

/// Single deterministic draw keyed by a (seed, stream) record.
pub fn sample_rbm(j: &CovarianceProfile, record: SeedRecord) -> RbmSample {
    let sampler = RbmSampler::new(j);
    let mut rng = stream_rng(record);
    let h = sampler.draw(&mut rng);
    RbmSample { h, seed_record: record }
}

/// Entrywise sample moments of a set of draws, with standard errors.
pub struct EmpiricalMoments {
    /// Mean of |H_ij|^2.
    pub mean_abs_sq: Array2<f64>,
    /// Mean of H_ij^2 (complex).
    pub mean_sq: Array2<Complex64>,
    /// Standard error of mean_abs_sq.
    pub se_abs_sq: Array2<f64>,
    /// Standard errors of Re/Im of mean_sq.
    pub se_sq_re: Array2<f64>,
    pub se_sq_im: Array2<f64>,
    pub count: usize,
}

pub fn empirical_covariance(samples: &[RbmSample]) -> Result<EmpiricalMoments> {
    if samples.len() < 2 {
        return Err(RbmError::InvalidArgument(
            "empirical_covariance needs at least 2 samples".into(),
        ));
    }
    let n = samples[0].h.nrows();
    if samples.iter().any(|s| s.h.nrows() != n) {
        return Err(RbmError::InvalidArgument("samples have mixed sizes".into()));
    }
    let mut acc = MomentAccumulator::new(n);
    for s in samples {
        acc.push(&s.h);
    }
    Ok(acc.finish())
}

/// Streaming accumulator for the same moments, so large validation runs
/// never hold all samples in memory.
pub struct MomentAccumulator {
    n: usize,
    count: usize,
    sum_abs2: Array2<f64>,
    sum_abs4: Array2<f64>,
    sum_sq: Array2<Complex64>,
    sum_sq_re2: Array2<f64>,
    sum_sq_im2: Array2<f64>,
}

impl MomentAccumulator {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            count: 0,
            sum_abs2: Array2::zeros((n, n)),
            sum_abs4: Array2::zeros((n, n)),
            sum_sq: Array2::zeros((n, n)),
            sum_sq_re2: Array2::zeros((n, n)),
            sum_sq_im2: Array2::zeros((n, n)),
        }
    }

    pub fn push(&mut self, h: &Array2<Complex64>) {
        self.count += 1;
        for i in 0..self.n {
            for k in 0..self.n {
                let v = h[[i, k]];
                let a2 = v.norm_sqr();
                let sq = v * v;
                self.sum_abs2[[i, k]] += a2;
                self.sum_abs4[[i, k]] += a2 * a2;
                self.sum_sq[[i, k]] += sq;
                self.sum_sq_re2[[i, k]] += sq.re * sq.re;
                self.sum_sq_im2[[i, k]] += sq.im * sq.im;
            }
        }
    }

    pub fn merge(&mut self, other: &MomentAccumulator) {
        self.count += other.count;
        self.sum_abs2 += &other.sum_abs2;
        self.sum_abs4 += &other.sum_abs4;
        self.sum_sq += &other.sum_sq;
        self.sum_sq_re2 += &other.sum_sq_re2;
        self.sum_sq_im2 += &other.sum_sq_im2;
    }

    pub fn finish(&self) -> EmpiricalMoments {
        let c = self.count as f64;
        let mean_abs_sq = self.sum_abs2.mapv(|v| v / c);
        let mean_sq = self.sum_sq.mapv(|v| v / c);
        let se = |sum: &Array2<f64>, mean: &Array2<f64>| -> Array2<f64> {
            let mut out = Array2::zeros((self.n, self.n));
            for i in 0..self.n {
                for k in 0..self.n {
                    let var = (sum[[i, k]] / c - mean[[i, k]] * mean[[i, k]]).max(0.0)
                        * c
                        / (c - 1.0);
                    out[[i, k]] = (var / c).sqrt();
                }
            }
            out
        };
        let mean_sq_re = mean_sq.mapv(|v| v.re);
        let mean_sq_im = mean_sq.mapv(|v| v.im);
        EmpiricalMoments {
            se_abs_sq: se(&self.sum_abs4, &mean_abs_sq),
            se_sq_re: se(&self.sum_sq_re2, &mean_sq_re),
            se_sq_im: se(&self.sum_sq_im2, &mean_sq_im),
            mean_abs_sq,
            mean_sq,
            count: self.count,
        }
    }
}
