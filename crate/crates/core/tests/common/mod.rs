#![allow(dead_code)]

use arsvd_core::matrix::{matmul, matmul_tn, DenseMatrix};
use arsvd_core::svd_exact;

pub fn to_na(a: &DenseMatrix) -> nalgebra::DMatrix<f64> {
    nalgebra::DMatrix::from_row_slice(a.n_rows(), a.n_cols(), a.as_slice())
}

/// Sorted (descending) singular values from nalgebra.
pub fn na_singular_values(a: &DenseMatrix) -> Vec<f64> {
    let mut s: Vec<f64> = to_na(a).singular_values().iter().copied().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

/// Largest principal angle (radians) between the column spans of two
/// orthonormal bases of equal width, from `‖(I − AAᵀ)B‖₂`.
pub fn max_principal_angle(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
    let proj = matmul(a, &matmul_tn(a, b).unwrap()).unwrap();
    let resid = b.sub(&proj).unwrap();
    let s = svd_exact(&resid).unwrap().s;
    s.first().copied().unwrap_or(0.0).min(1.0).asin()
}

pub fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}
