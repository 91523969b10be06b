use crate::error::{Error, Result};
use crate::matrix::{axpy, dot, matmul, norm2, DenseMatrix};

use super::qr::qr_thin;

const MAX_SWEEPS: usize = 80;

/// Thin SVD `a = u · diag(s) · vᵀ` with `s` non-increasing.
#[derive(Debug, Clone)]
pub struct SvdFactors {
    pub u: DenseMatrix,
    pub s: Vec<f64>,
    pub v: DenseMatrix,
}

impl SvdFactors {
    pub fn reconstruct(&self) -> DenseMatrix {
        let mut us = self.u.clone();
        us.scale_cols(&self.s);
        crate::matrix::matmul_nt(&us, &self.v).expect("consistent factor shapes")
    }
}

/// Exact thin SVD.
///
/// Wide inputs are handled through the transpose. Tall inputs are first reduced
/// with Householder QR and the square triangular factor goes through one-sided
/// (Hestenes) Jacobi, which delivers small singular values to high relative
/// accuracy.
pub fn svd_exact(a: &DenseMatrix) -> Result<SvdFactors> {
    let (m, n) = a.shape();
    if !a.is_finite() {
        return Err(Error::input("svd_exact needs finite entries"));
    }
    if m < n {
        let t = svd_exact(&a.transpose())?;
        return Ok(SvdFactors { u: t.v, s: t.s, v: t.u });
    }
    if n == 0 {
        return Ok(SvdFactors { u: DenseMatrix::zeros(m, 0), s: vec![], v: DenseMatrix::zeros(0, 0) });
    }
    if m > n {
        let qr = qr_thin(a)?;
        let inner = jacobi_square(&qr.r)?;
        let u = matmul(&qr.q, &inner.u)?;
        return Ok(SvdFactors { u, s: inner.s, v: inner.v });
    }
    jacobi_square(a)
}

/// One-sided Jacobi on a square matrix: orthogonalize columns by plane rotations.
fn jacobi_square(a: &DenseMatrix) -> Result<SvdFactors> {
    let n = a.n_cols();
    debug_assert_eq!(a.n_rows(), n);
    // g[j] = column j of the working matrix, v[j] = column j of V
    let mut g: Vec<Vec<f64>> = (0..n).map(|j| a.col(j)).collect();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            e
        })
        .collect();
    let tol = f64::EPSILON * (n as f64).max(1.0);
    // rotations preserve the Frobenius norm; columns below this are roundoff
    let negligible = (f64::EPSILON * a.frobenius_norm()).powi(2);
    let mut converged = n < 2;
    let mut last_off = 0.0_f64;
    for _ in 0..MAX_SWEEPS {
        if converged {
            break;
        }
        let mut rotated = false;
        last_off = 0.0;
        for p in 0..n - 1 {
            for q in p + 1..n {
                let alpha = dot(&g[p], &g[p]);
                let beta = dot(&g[q], &g[q]);
                let gamma = dot(&g[p], &g[q]);
                if alpha <= negligible || beta <= negligible {
                    continue;
                }
                let off = gamma.abs() / (alpha * beta).sqrt();
                last_off = last_off.max(off);
                if off <= tol {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut g, p, q, c, s);
                rotate(&mut v, p, q, c, s);
            }
        }
        converged = !rotated;
    }
    if !converged {
        return Err(Error::NoConvergence { method: "one-sided Jacobi SVD", iterations: MAX_SWEEPS, residual: last_off });
    }

    let mut order: Vec<usize> = (0..n).collect();
    let norms: Vec<f64> = g.iter().map(|c| norm2(c)).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]).then(i.cmp(&j)));
    let s: Vec<f64> = order.iter().map(|&j| norms[j]).collect();
    let smax = s.first().copied().unwrap_or(0.0);
    let floor = smax * f64::EPSILON * n as f64;

    let mut ucols: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut needs_completion = Vec::new();
    for (k, &j) in order.iter().enumerate() {
        if s[k] > floor && s[k] > 0.0 {
            ucols.push(g[j].iter().map(|x| x / s[k]).collect());
        } else {
            ucols.push(vec![0.0; n]);
            needs_completion.push(k);
        }
    }
    complete_orthonormal(&mut ucols, &needs_completion);
    let u = DenseMatrix::from_fn(n, n, |i, k| ucols[k][i]);
    let vm = DenseMatrix::from_fn(n, n, |i, k| v[order[k]][i]);
    Ok(SvdFactors { u, s, v: vm })
}

#[inline]
fn rotate(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (lo, hi) = cols.split_at_mut(q);
    let (cp, cq) = (&mut lo[p], &mut hi[0]);
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let (xp, xq) = (*x, *y);
        *x = c * xp - s * xq;
        *y = s * xp + c * xq;
    }
}

/// Fills the listed columns with unit vectors orthogonal to all other columns.
///
/// Each new column starts from the coordinate vector with the smallest
/// leverage on the columns already in place, so its residual is as large as
/// possible.
pub(crate) fn complete_orthonormal(cols: &mut [Vec<f64>], slots: &[usize]) {
    if slots.is_empty() {
        return;
    }
    let m = cols[0].len();
    let mut filled: Vec<usize> = (0..cols.len()).filter(|k| !slots.contains(k)).collect();
    let mut leverage = vec![0.0; m];
    for &k in &filled {
        for (l, x) in leverage.iter_mut().zip(&cols[k]) {
            *l += x * x;
        }
    }
    for &slot in slots {
        let pick = (0..m).fold(0, |b, i| if leverage[i] < leverage[b] { i } else { b });
        let mut e = vec![0.0; m];
        e[pick] = 1.0;
        for _ in 0..2 {
            for &k in &filled {
                let proj = dot(&cols[k], &e);
                axpy(-proj, &cols[k], &mut e);
            }
        }
        let nrm = norm2(&e);
        e.iter_mut().for_each(|x| *x /= nrm);
        for (l, x) in leverage.iter_mut().zip(&e) {
            *l += x * x;
        }
        cols[slot] = e;
        filled.push(slot);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{gaussian_matrix, RngSeed};

    fn rel_err(a: &DenseMatrix, f: &SvdFactors) -> f64 {
        f.reconstruct().sub(a).unwrap().frobenius_norm() / a.frobenius_norm().max(1e-300)
    }

    #[test]
    fn diagonal_input() {
        let a = DenseMatrix::from_diag(&[3.0, 2.0, 1.0]);
        let f = svd_exact(&a).unwrap();
        assert_eq!(f.s, vec![3.0, 2.0, 1.0]);
        assert!(f.u.sub(&DenseMatrix::identity(3)).unwrap().max_abs() < 1e-15);
        assert!(f.v.sub(&DenseMatrix::identity(3)).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn orthogonal_input_has_unit_values() {
        let a = DenseMatrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]).unwrap();
        let f = svd_exact(&a).unwrap();
        for s in &f.s {
            assert!((s - 1.0).abs() < 1e-15);
        }
        assert!(rel_err(&a, &f) < 1e-15);
    }

    #[test]
    fn tall_and_wide_random() {
        for &(m, n) in &[(20, 15), (15, 20), (60, 7), (9, 9)] {
            let a = gaussian_matrix(m, n, RngSeed::new((m * 100 + n) as u64));
            let f = svd_exact(&a).unwrap();
            assert!(rel_err(&a, &f) <= 1e-12);
            assert!(f.u.orthonormality_defect() <= 1e-12);
            assert!(f.v.orthonormality_defect() <= 1e-12);
            assert!(f.s.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn rank_deficient_keeps_orthonormal_factors() {
        let col = DenseMatrix::column(&[1.0, 2.0, 3.0, 4.0]);
        let row = DenseMatrix::from_rows(&[[1.0, -1.0, 0.5]]).unwrap();
        let a = matmul(&col, &row).unwrap();
        let f = svd_exact(&a).unwrap();
        assert!(f.s[1] < 1e-14 && f.s[2] < 1e-14);
        assert!(f.u.orthonormality_defect() <= 1e-12);
        assert!(f.v.orthonormality_defect() <= 1e-12);
        assert!(rel_err(&a, &f) < 1e-14);
    }

    #[test]
    fn completion_with_spread_null_vector() {
        let n = 60;
        let a = DenseMatrix::from_fn(n, n, |i, j| f64::from(u8::from(i == j)) - 1.0 / n as f64);
        let f = svd_exact(&a).unwrap();
        assert!(f.u.orthonormality_defect() < 1e-12);
        assert!(f.v.orthonormality_defect() < 1e-12);
        assert!(f.s[n - 1] < 1e-12);
        assert!(rel_err(&a, &f) < 1e-12);
    }

    #[test]
    fn exact_column_dependencies_converge() {
        let g = crate::rng::gaussian_matrix(300, 11, crate::rng::RngSeed::new(8));
        let a = DenseMatrix::from_fn(300, 13, |i, j| match j {
            11 => 2.0 * g[(i, 0)],
            12 => 0.0,
            _ => g[(i, j)],
        });
        let f = svd_exact(&a).unwrap();
        assert!(f.s[11] < 1e-12 * f.s[0] && f.s[12] < 1e-12 * f.s[0]);
        assert!(f.v.orthonormality_defect() < 1e-12);
        assert!(rel_err(&a, &f) < 1e-13);
    }

    #[test]
    fn zero_matrix() {
        let f = svd_exact(&DenseMatrix::zeros(4, 3)).unwrap();
        assert_eq!(f.s, vec![0.0; 3]);
        assert!(f.u.orthonormality_defect() <= 1e-15);
    }
}
