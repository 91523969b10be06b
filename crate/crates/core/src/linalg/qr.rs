use crate::error::{Error, Result};
use crate::matrix::{axpy, dot, norm2, DenseMatrix};

/// Relative threshold on `|R_ii|` below which a column is reported as dependent.
pub const RANK_TOL: f64 = 1e-12;

/// Thin QR factors with a non-negative diagonal on `r`.
#[derive(Debug, Clone)]
pub struct QrFactors {
    pub q: DenseMatrix,
    pub r: DenseMatrix,
    /// `|R_ii| ≤ 1e-12 · max_j |R_jj|` for at least one `i`.
    pub rank_deficient: bool,
    /// Number of diagonal entries of `r` above the rank threshold.
    pub rank: usize,
}

/// Householder QR of a tall matrix, `a = q · r` with `q` (m×n) orthonormal.
///
/// Works on a column-contiguous copy of `a` so every reflector touches
/// contiguous memory. Rank deficiency is flagged, not fatal: `q` keeps
/// orthonormal columns either way.
pub fn qr_thin(a: &DenseMatrix) -> Result<QrFactors> {
    let (m, n) = a.shape();
    if m < n {
        return Err(Error::input(format!("qr_thin needs rows >= cols, got {m}x{n}")));
    }
    // cols[j] is column j of the working matrix
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| a.col(j)).collect();
    let mut reflectors: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut r = DenseMatrix::zeros(n, n);

    for j in 0..n {
        let x = &cols[j][j..];
        let norm = norm2(x);
        let mut v = x.to_vec();
        let alpha;
        if norm == 0.0 {
            alpha = 0.0;
            v.iter_mut().for_each(|e| *e = 0.0);
        } else {
            alpha = if x[0] >= 0.0 { -norm } else { norm };
            v[0] -= alpha;
            let vn = norm2(&v);
            if vn > 0.0 {
                v.iter_mut().for_each(|e| *e /= vn);
            }
        }
        r[(j, j)] = alpha;
        for k in j + 1..n {
            let tail = &mut cols[k][j..];
            let proj = 2.0 * dot(&v, tail);
            axpy(-proj, &v, tail);
            r[(j, k)] = tail[0];
        }
        reflectors.push(v);
    }

    // Q = H_0 ⋯ H_{n-1} applied to the first n unit vectors, stored by column.
    let mut qcols: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut e = vec![0.0; m];
            e[j] = 1.0;
            e
        })
        .collect();
    for (j, v) in reflectors.iter().enumerate().rev() {
        for qc in qcols.iter_mut().skip(j) {
            let tail = &mut qc[j..];
            let proj = 2.0 * dot(v, tail);
            if proj != 0.0 {
                axpy(-proj, v, tail);
            }
        }
    }

    // Non-negative diagonal: flip q column j and r row j together.
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            for k in j..n {
                r[(j, k)] = -r[(j, k)];
            }
            qcols[j].iter_mut().for_each(|e| *e = -*e);
        }
    }

    let max_diag = (0..n).fold(0.0_f64, |acc, j| acc.max(r[(j, j)].abs()));
    let rank = (0..n).filter(|&j| r[(j, j)].abs() > RANK_TOL * max_diag).count();
    let q = DenseMatrix::from_fn(m, n, |i, j| qcols[j][i]);
    Ok(QrFactors { q, r, rank_deficient: rank < n, rank })
}
