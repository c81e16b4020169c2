//! Dense complex matrix exponential by scaling-and-squaring with the
//! Padé(13,13) approximant (Higham 2005). Sizes here stay <= 256, so a
//! single fixed-order approximant with conservative scaling suffices.

use ndarray::Array2;
use ndarray_linalg::Solve;
use num_complex::Complex64;

use crate::error::{Result, RbmError};

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

/// Threshold on the scaled 1-norm below which Padé(13) meets unit
/// roundoff backward error (Higham, Table 10.2).
const THETA13: f64 = 5.371920351148152;

fn one_norm(a: &Array2<Complex64>) -> f64 {
    let n = a.ncols();
    (0..n)
        .map(|j| a.column(j).iter().map(|v| v.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// exp(A) for a square complex matrix.
pub fn expm(a: &Array2<Complex64>) -> Result<Array2<Complex64>> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(RbmError::InvalidArgument("expm needs a square matrix".into()));
    }
    if a.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(RbmError::InvalidArgument("expm needs finite entries".into()));
    }
    if n == 0 {
        return Ok(Array2::zeros((0, 0)));
    }

    let norm = one_norm(a);
    let s = if norm > THETA13 {
        (norm / THETA13).log2().ceil() as u32
    } else {
        0
    };
    let scaled = a.mapv(|v| v / 2f64.powi(s as i32));

    let a2 = scaled.dot(&scaled);
    let a4 = a2.dot(&a2);
    let a6 = a4.dot(&a2);
    let eye = Array2::<Complex64>::eye(n);

    // u = A (b13 A6 + b11 A4 + b9 A2) A6 + A (b7 A6 + b5 A4 + b3 A2 + b1 I)
    let u_inner = a6.mapv(|v| v * PADE13[13])
        + a4.mapv(|v| v * PADE13[11])
        + a2.mapv(|v| v * PADE13[9]);
    let u_small = a6.mapv(|v| v * PADE13[7])
        + a4.mapv(|v| v * PADE13[5])
        + a2.mapv(|v| v * PADE13[3])
        + eye.mapv(|v| v * PADE13[1]);
    let u = scaled.dot(&(u_inner.dot(&a6) + u_small));

    // v = (b12 A6 + b10 A4 + b8 A2) A6 + b6 A6 + b4 A4 + b2 A2 + b0 I
    let v_inner = a6.mapv(|v| v * PADE13[12])
        + a4.mapv(|v| v * PADE13[10])
        + a2.mapv(|v| v * PADE13[8]);
    let v = v_inner.dot(&a6)
        + a6.mapv(|v| v * PADE13[6])
        + a4.mapv(|v| v * PADE13[4])
        + a2.mapv(|v| v * PADE13[2])
        + eye.mapv(|v| v * PADE13[0]);

    // (v - u) X = (v + u)
    let lhs = &v - &u;
    let rhs = &v + &u;
    let mut result = Array2::zeros((n, n));
    for j in 0..n {
        let col = lhs
            .solve(&rhs.column(j).to_owned())
            .map_err(|e| RbmError::Numerical(format!("Padé solve failed: {e}")))?;
        result.column_mut(j).assign(&col);
    }

    for _ in 0..s {
        result = result.dot(&result);
    }
    Ok(result)
}
