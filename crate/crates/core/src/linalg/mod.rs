//! Small exact factorizations.

mod eigen;
mod qr;
mod svd;

pub use eigen::{sym_eigen, SymEigen};
pub use qr::{qr_thin, QrFactors, RANK_TOL};
pub use svd::{svd_exact, SvdFactors};

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;

/// Cholesky factor `L` (lower) of a symmetric positive definite matrix.
pub fn cholesky(a: &DenseMatrix) -> Result<DenseMatrix> {
    let n = a.n_rows();
    if a.n_cols() != n {
        return Err(Error::input("cholesky needs a square matrix"));
    }
    let mut l = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let mut diag = a[(j, j)];
        for k in 0..j {
            diag -= l[(j, k)] * l[(j, k)];
        }
        if diag <= 0.0 || !diag.is_finite() {
            return Err(Error::Numerical(format!("matrix not positive definite at pivot {j}")));
        }
        let djj = diag.sqrt();
        l[(j, j)] = djj;
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / djj;
        }
    }
    Ok(l)
}

/// Solves `L Lᵀ x = b` given the Cholesky factor.
pub fn cholesky_solve(l: &DenseMatrix, b: &[f64]) -> Vec<f64> {
    let n = l.n_rows();
    let mut y = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            y[i] -= l[(i, k)] * y[k];
        }
        y[i] /= l[(i, i)];
    }
    for i in (0..n).rev() {
        for k in i + 1..n {
            y[i] -= l[(k, i)] * y[k];
        }
        y[i] /= l[(i, i)];
    }
    y
}

/// `log det` of `L Lᵀ`.
pub fn cholesky_logdet(l: &DenseMatrix) -> f64 {
    (0..l.n_rows()).map(|i| 2.0 * l[(i, i)].ln()).sum()
}
