use nalgebra::DMatrix;

use super::polynomial::Polynomial;
use crate::error::{Error, Result};

/// Threshold below which the largest real part counts as stable.
pub const ORACLE_MARGIN: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleVerdict {
    pub stable: bool,
    pub max_real_part: f64,
}

/// Frobenius companion matrix of a polynomial with positive leading coefficient.
pub fn companion_matrix(p: &Polynomial) -> Result<DMatrix<f64>> {
    let c = p.to_f64();
    let degree = match p.degree() {
        Some(d) if d >= 1 => d,
        _ => return Err(Error::invalid("companion matrix needs degree >= 1")),
    };
    if !(c[0] > 0.0) {
        return Err(Error::invalid("companion matrix needs a positive leading coefficient"));
    }
    let mut m = DMatrix::zeros(degree, degree);
    for j in 0..degree {
        m[(0, j)] = -c[j + 1] / c[0];
    }
    for i in 1..degree {
        m[(i, i - 1)] = 1.0;
    }
    Ok(m)
}

/// Floating-point Hurwitz test through the eigenvalues of the companion matrix
/// (real Schur form by shifted QR). Only used to cross-check the exact Routh test.
pub fn hurwitz_eig_oracle(p: &Polynomial) -> Result<OracleVerdict> {
    let m = companion_matrix(p)?;
    let schur = nalgebra::linalg::Schur::try_new(m, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::OracleFailure("QR iteration did not converge".into()))?;
    let eig = schur.complex_eigenvalues();
    let max_real_part = eig.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    Ok(OracleVerdict {
        stable: max_real_part < -ORACLE_MARGIN,
        max_real_part,
    })
}
