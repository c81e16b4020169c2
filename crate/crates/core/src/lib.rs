//! Numerical laboratory for the second correlation function of
//! characteristic polynomials of 1D Gaussian Hermitian random band
//! matrices.
//!
//! Two routes to the same object:
//! * Monte Carlo over the band ensemble ([`charpoly`]), estimating
//!   F̄₂(ξ) from Hermitian eigenvalues in log space;
//! * the analytic crossover limit (e^{-C*Δ_U - iπξ ν̂}·1, 1) evaluated
//!   by Legendre spectral truncation ([`sphere`]).
//!
//! Supporting pieces: the band covariance profile ([`covariance`]), the
//! reproducible sampler ([`ensemble`]), transfer-kernel diagnostics
//! ([`diagnostics`]), and the experiment CLI plumbing ([`report`]).

pub mod accumulator;
pub mod charpoly;
pub mod covariance;
pub mod diagnostics;
pub mod ensemble;
pub mod error;
pub mod expm;
pub mod quadrature;
pub mod report;
pub mod saddle;
pub mod sphere;

pub use error::{RbmError, Result};
pub use saddle::semicircle_rho;
