//! Run records, deterministic CSV formatting, and the binary sample
//! layout used by the CLI.
//!
//! CSV payloads are bit-stable across platforms: 17 significant digits,
//! '.' decimal separator, '\n' line endings. Wall-clock data lives only
//! in the run record, never in CSV rows.

use std::io::Write;
use std::path::Path;

use ndarray::Array2;
use num_complex::Complex64;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::charpoly::{CrossoverRow, F2Estimate};
use crate::covariance::CovarianceProfile;
use crate::error::Result;
use crate::sphere::LimitValue;

/// 17 significant digits, locale-independent.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn format_estimates_csv(estimates: &[F2Estimate]) -> String {
    let mut out = String::from("xi,value,stderr,n_samples,ess_ratio\n");
    for e in estimates {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            fmt_f64(e.xi),
            fmt_f64(e.value),
            fmt_f64(e.stderr),
            e.n_samples,
            fmt_f64(e.ess_ratio)
        ));
    }
    out
}

pub fn format_limit_csv(rows: &[(f64, LimitValue)]) -> String {
    let mut out = String::from("xi,value,imag_residual,L_used\n");
    for (xi, v) in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            fmt_f64(*xi),
            fmt_f64(v.value_re),
            fmt_f64(v.value_im.abs()),
            v.l_used
        ));
    }
    out
}

pub fn format_kstar_csv(rows: &[(usize, f64, f64)]) -> String {
    let mut out = String::from("j,lambda_quadrature,lambda_asymptotic,rel_dev\n");
    for (j, quad, asym) in rows {
        let rel = if *asym != 0.0 { ((quad - asym) / asym).abs() } else { f64::NAN };
        out.push_str(&format!(
            "{},{},{},{}\n",
            j,
            fmt_f64(*quad),
            fmt_f64(*asym),
            fmt_f64(rel)
        ));
    }
    out
}

pub fn format_scan_csv(rows: &[(f64, LimitValue)]) -> String {
    let mut out = String::from("cstar,value,imag_residual,L_used\n");
    for (cstar, v) in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            fmt_f64(*cstar),
            fmt_f64(v.value_re),
            fmt_f64(v.value_im.abs()),
            v.l_used
        ));
    }
    out
}

pub fn format_compare_csv(rows: &[CrossoverRow]) -> String {
    let mut out = String::from("xi,mc_value,mc_stderr,limit_value,abs_gap\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            fmt_f64(r.xi),
            fmt_f64(r.mc_value),
            fmt_f64(r.mc_stderr),
            fmt_f64(r.limit_value),
            fmt_f64((r.mc_value - r.limit_value).abs())
        ));
    }
    out
}

/// Covariance matrix as n rows of n comma-separated decimals, no header.
pub fn format_covariance_csv(j: &CovarianceProfile) -> String {
    let n = j.n();
    let e = j.entries();
    let mut out = String::new();
    for i in 0..n {
        let row: Vec<String> = (0..n).map(|k| fmt_f64(e[[i, k]])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Serialize)]
pub struct OutputRecord {
    pub path: String,
    pub sha256: String,
}

/// Provenance record emitted for every CLI run.
#[derive(Debug, Serialize)]
pub struct RunRecord {
    pub config: serde_json::Value,
    pub version: String,
    pub duration_secs: f64,
    pub outputs: Vec<OutputRecord>,
    pub warnings: Vec<String>,
}

impl RunRecord {
    pub fn new(config: serde_json::Value) -> Self {
        Self {
            config,
            version: env!("CARGO_PKG_VERSION").to_string(),
            duration_secs: 0.0,
            outputs: Vec::new(),
            warnings: Vec::new(),
        }
    }

    pub fn add_output(&mut self, path: &Path, payload: &[u8]) {
        self.outputs.push(OutputRecord {
            path: path.display().to_string(),
            sha256: sha256_hex(payload),
        });
    }
}

/// Binary layout for sampled matrices: header {magic "RBM1", n: u32 LE,
/// count: u32 LE}, then count blocks of n² complex entries as interleaved
/// (re, im) f64 LE, row-major.
pub fn write_samples_binary<W: Write>(
    out: &mut W,
    n: usize,
    samples: &[Array2<Complex64>],
) -> Result<()> {
    out.write_all(b"RBM1")?;
    out.write_all(&(n as u32).to_le_bytes())?;
    out.write_all(&(samples.len() as u32).to_le_bytes())?;
    for h in samples {
        for i in 0..n {
            for k in 0..n {
                let v = h[[i, k]];
                out.write_all(&v.re.to_le_bytes())?;
                out.write_all(&v.im.to_le_bytes())?;
            }
        }
    }
    Ok(())
}

/// Read back the binary sample layout (used by tests and downstream
/// consumers of the `sample` subcommand).
pub fn read_samples_binary(bytes: &[u8]) -> Result<(usize, Vec<Array2<Complex64>>)> {
    use crate::error::RbmError;
    if bytes.len() < 12 || &bytes[0..4] != b"RBM1" {
        return Err(RbmError::InvalidArgument("bad sample file header".into()));
    }
    let n = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let count = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let expected = 12 + count * n * n * 16;
    if bytes.len() != expected {
        return Err(RbmError::InvalidArgument(format!(
            "sample file length {} does not match header ({expected})",
            bytes.len()
        )));
    }
    let mut offset = 12;
    let mut samples = Vec::with_capacity(count);
    for _ in 0..count {
        let mut h = Array2::zeros((n, n));
        for i in 0..n {
            for k in 0..n {
                let re = f64::from_le_bytes(bytes[offset..offset + 8].try_into().unwrap());
                let im = f64::from_le_bytes(bytes[offset + 8..offset + 16].try_into().unwrap());
                h[[i, k]] = Complex64::new(re, im);
                offset += 16;
            }
        }
        samples.push(h);
    }
    Ok((n, samples))
}
