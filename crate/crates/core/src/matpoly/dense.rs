use std::fmt;
use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};

/// Row-major dense real matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, entries: Vec<f64>) -> Result<Self> {
        if rows * cols != entries.len() {
            return Err(Error::invalid(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                entries.len()
            )));
        }
        Ok(Self { rows, cols, entries })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            entries: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::invalid("ragged rows"));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, rhs: &DenseMatrix) -> Result<Self> {
        if self.cols != rhs.rows {
            return Err(Error::invalid(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                for j in 0..rhs.cols {
                    out[(i, j)] += a * rhs[(k, j)];
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self[(i, j)] * x[j]).sum())
            .collect()
    }

    pub fn add(&self, rhs: &DenseMatrix) -> Result<Self> {
        if (self.rows, self.cols) != (rhs.rows, rhs.cols) {
            return Err(Error::invalid("shape mismatch in addition"));
        }
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().zip(&rhs.entries).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest `|a_ij - a_ji|`.
    pub fn max_skew(&self) -> f64 {
        let mut skew: f64 = 0.0;
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                skew = skew.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        skew
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.entries[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.entries[i * self.cols + j]
    }
}

impl fmt::Display for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.rows {
            let row: Vec<String> = (0..self.cols).map(|j| format!("{:>12.6}", self[(i, j)])).collect();
            writeln!(f, "[{}]", row.join(" "))?;
        }
        Ok(())
    }
}

/// Solves `a x = b` by LU factorisation with partial pivoting.
pub(crate) fn lu_solve(mut a: DenseMatrix, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let n = a.rows;
    debug_assert!(a.is_square() && b.len() == n);
    let scale = a.max_abs().max(f64::MIN_POSITIVE);
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&r, &s| a[(r, col)].abs().total_cmp(&a[(s, col)].abs()))
            .unwrap_or(col);
        if a[(pivot_row, col)].abs() <= 1e-13 * scale {
            return Err(Error::SingularOrIndefinite(format!(
                "zero pivot in column {col} of the {n}x{n} system"
            )));
        }
        if pivot_row != col {
            for j in 0..n {
                a.entries.swap(pivot_row * n + j, col * n + j);
            }
            b.swap(pivot_row, col);
        }
        let pivot = a[(col, col)];
        for r in (col + 1)..n {
            let factor = a[(r, col)] / pivot;
            if factor == 0.0 {
                continue;
            }
            a[(r, col)] = factor;
            for j in (col + 1)..n {
                let v = a[(col, j)];
                a[(r, j)] -= factor * v;
            }
            b[r] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let tail: f64 = ((i + 1)..n).map(|j| a[(i, j)] * x[j]).sum();
        x[i] = (b[i] - tail) / a[(i, i)];
    }
    Ok(x)
}

/// Lyapunov equation `Aᵀ P + P A = -I` for Hurwitz `A`.
///
/// The `m(m+1)/2` distinct entries of the symmetric `P` are the unknowns; the
/// resulting dense system is solved by pivoted LU.
pub fn solve_lyapunov(a: &DenseMatrix) -> Result<DenseMatrix> {
    if !a.is_square() || a.rows == 0 {
        return Err(Error::invalid(format!(
            "Lyapunov solve needs a non-empty square matrix, got {}x{}",
            a.rows, a.cols
        )));
    }
    let m = a.rows;
    let unknowns = m * (m + 1) / 2;
    let slot = |i: usize, j: usize| {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        i * m - i * (i + 1) / 2 + j
    };

    let mut system = DenseMatrix::zeros(unknowns, unknowns);
    let mut rhs = vec![0.0; unknowns];
    for i in 0..m {
        for j in i..m {
            let eq = slot(i, j);
            // (AᵀP)_ij = Σ_k a_ki p_kj ;  (PA)_ij = Σ_k p_ik a_kj
            for k in 0..m {
                system[(eq, slot(k, j))] += a[(k, i)];
                system[(eq, slot(i, k))] += a[(k, j)];
            }
            if i == j {
                rhs[eq] = -1.0;
            }
        }
    }

    let solution = lu_solve(system, rhs)?;
    let mut p = DenseMatrix::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            p[(i, j)] = solution[slot(i, j)];
        }
    }

    let residual = lyapunov_residual(a, &p);
    if !(residual <= 1e-10) {
        return Err(Error::NumericFailure(format!(
            "Lyapunov residual {residual:e} exceeds 1e-10"
        )));
    }
    if !is_positive_definite(&p) {
        return Err(Error::SingularOrIndefinite(
            "Lyapunov solution is not positive definite; the matrix is not Hurwitz".into(),
        ));
    }
    Ok(p)
}

/// `‖AᵀP + PA + I‖_max`.
pub fn lyapunov_residual(a: &DenseMatrix, p: &DenseMatrix) -> f64 {
    let m = a.rows;
    let mut worst: f64 = 0.0;
    for i in 0..m {
        for j in 0..m {
            let mut r = if i == j { 1.0 } else { 0.0 };
            for k in 0..m {
                r += a[(k, i)] * p[(k, j)] + p[(i, k)] * a[(k, j)];
            }
            worst = worst.max(r.abs());
        }
    }
    if worst.is_nan() {
        f64::INFINITY
    } else {
        worst
    }
}

fn is_positive_definite(p: &DenseMatrix) -> bool {
    // Cholesky succeeds iff the symmetric matrix is positive definite.
    let n = p.rows;
    let mut l = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[(i, k)] * l[(j, k)]).sum();
            if i == j {
                let d = p[(i, i)] - s;
                if !(d > 0.0) {
                    return false;
                }
                l[(i, i)] = d.sqrt();
            } else {
                l[(i, j)] = (p[(i, j)] - s) / l[(j, j)];
            }
        }
    }
    true
}

const SYMMETRY_TOL: f64 = 1e-12;

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
pub fn symmetric_eigenvalues(p: &DenseMatrix) -> Result<Vec<f64>> {
    if !p.is_square() {
        return Err(Error::invalid("eigenvalues of a non-square matrix"));
    }
    let skew = p.max_skew();
    if skew > SYMMETRY_TOL {
        return Err(Error::invalid(format!("matrix is not symmetric (skew {skew:e})")));
    }
    let n = p.rows;
    let mut a = p.clone();
    let frobenius = a.entries.iter().map(|v| v * v).sum::<f64>().sqrt();
    let target = 1e-15 * frobenius.max(1e-300);

    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum::<f64>()
            .sqrt();
        if off <= target {
            break;
        }
        for pi in 0..n {
            for qi in (pi + 1)..n {
                let apq = a[(pi, qi)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(qi, qi)] - a[(pi, pi)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, pi)];
                    let akq = a[(k, qi)];
                    a[(k, pi)] = c * akp - s * akq;
                    a[(k, qi)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(pi, k)];
                    let aqk = a[(qi, k)];
                    a[(pi, k)] = c * apk - s * aqk;
                    a[(qi, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    eig.sort_by(f64::total_cmp);
    Ok(eig)
}

/// Spectral norm of a symmetric matrix: the largest eigenvalue magnitude.
pub fn spectral_norm(p: &DenseMatrix) -> Result<f64> {
    Ok(symmetric_eigenvalues(p)?
        .into_iter()
        .fold(0.0, |m: f64, v| m.max(v.abs())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_checked() {
        assert!(DenseMatrix::new(2, 2, vec![1.0; 3]).is_err());
        assert!(DenseMatrix::from_rows(&[&[1.0, 2.0], &[3.0]]).is_err());
    }

    #[test]
    fn scalar_lyapunov() {
        let p = solve_lyapunov(&DenseMatrix::diag(&[-1.0])).unwrap();
        assert!((p[(0, 0)] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn decoupled_lyapunov() {
        let p = solve_lyapunov(&DenseMatrix::diag(&[-1.0, -3.0])).unwrap();
        assert!((p[(0, 0)] - 0.5).abs() < 1e-14);
        assert!((p[(1, 1)] - 1.0 / 6.0).abs() < 1e-14);
        assert!(p[(0, 1)].abs() < 1e-14);
    }

    #[test]
    fn companion_lyapunov_matches_hand_solution() {
        // Hand solve of the three symmetric unknowns: P = [[1/2, -1/2], [-1/2, 3/2]].
        let a = DenseMatrix::from_rows(&[&[-2.0, 1.0], &[-1.0, 0.0]]).unwrap();
        let p = solve_lyapunov(&a).unwrap();
        let expected = [0.5, -0.5, -0.5, 1.5];
        for (got, want) in p.entries().iter().zip(expected) {
            assert!((got - want).abs() < 1e-14, "{got} vs {want}");
        }
    }

    #[test]
    fn unstable_matrix_rejected() {
        let err = solve_lyapunov(&DenseMatrix::diag(&[1.0, -1.0])).unwrap_err();
        assert!(matches!(err, Error::SingularOrIndefinite(_)), "{err:?}");
        // eigenvalues ±i make the Lyapunov operator singular
        let rot = DenseMatrix::from_rows(&[&[0.0, 1.0], &[-1.0, 0.0]]).unwrap();
        assert!(matches!(solve_lyapunov(&rot), Err(Error::SingularOrIndefinite(_))));
    }

    #[test]
    fn spectral_norm_examples() {
        assert!((spectral_norm(&DenseMatrix::diag(&[0.5, 1.0 / 6.0])).unwrap() - 0.5).abs() < 1e-12);
        let m = DenseMatrix::from_rows(&[&[2.0, 1.0], &[1.0, 2.0]]).unwrap();
        assert!((spectral_norm(&m).unwrap() - 3.0).abs() < 1e-12);
        let neg = DenseMatrix::diag(&[-4.0, 1.0]);
        assert!((spectral_norm(&neg).unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn spectral_norm_of_companion_solution() {
        // eigenvalues of [[1/2, -1/2], [-1/2, 3/2]] are 1 ± 1/√2
        let a = DenseMatrix::from_rows(&[&[-2.0, 1.0], &[-1.0, 0.0]]).unwrap();
        let p = solve_lyapunov(&a).unwrap();
        let norm = spectral_norm(&p).unwrap();
        assert!((norm - (1.0 + std::f64::consts::FRAC_1_SQRT_2)).abs() < 1e-12);
    }

    #[test]
    fn asymmetric_input_rejected() {
        let m = DenseMatrix::from_rows(&[&[1.0, 1.0], &[0.0, 1.0]]).unwrap();
        assert!(matches!(spectral_norm(&m), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn lu_solves_permuted_system() {
        let a = DenseMatrix::from_rows(&[&[0.0, 2.0], &[3.0, 1.0]]).unwrap();
        let x = lu_solve(a, vec![4.0, 5.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 2.0).abs() < 1e-15);
    }
}
