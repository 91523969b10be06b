use crate::error::{Error, Result};
use crate::matrix::{axpy, dot, norm2, DenseMatrix};

const MAX_QL_ITERS: usize = 60;

/// Eigendecomposition of a symmetric matrix, eigenvalues in non-increasing order.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: Vec<f64>,
    /// Eigenvectors as columns; `None` when only values were requested.
    pub vectors: Option<DenseMatrix>,
}

/// Symmetric eigensolver: Householder tridiagonalization then implicit QL.
///
/// Only the lower triangle of `a` is trusted; the upper triangle is ignored.
/// All updates run over contiguous rows of the row-major working copy.
pub fn sym_eigen(a: &DenseMatrix, want_vectors: bool) -> Result<SymEigen> {
    let n = a.n_rows();
    if a.n_cols() != n {
        return Err(Error::input(format!("sym_eigen needs a square matrix, got {:?}", a.shape())));
    }
    if n == 0 {
        return Ok(SymEigen { values: vec![], vectors: want_vectors.then(|| DenseMatrix::zeros(0, 0)) });
    }
    let mut w = DenseMatrix::from_fn(n, n, |i, j| if j <= i { a[(i, j)] } else { a[(j, i)] });
    let reflectors = tridiagonalize(&mut w);
    let mut d: Vec<f64> = (0..n).map(|i| w[(i, i)]).collect();
    let mut e: Vec<f64> = (0..n).map(|i| if i + 1 < n { w[(i + 1, i)] } else { 0.0 }).collect();
    drop(w);

    // zt row k holds the k-th eigenvector of the tridiagonal matrix
    let mut zt = want_vectors.then(|| DenseMatrix::identity(n));
    tql(&mut d, &mut e, zt.as_mut())?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[j].total_cmp(&d[i]).then(i.cmp(&j)));
    let values = order.iter().map(|&i| d[i]).collect();
    let vectors = zt.map(|zt| {
        let mut z = DenseMatrix::from_fn(n, n, |i, k| zt[(order[k], i)]);
        back_transform(&mut z, &reflectors);
        z
    });
    Ok(SymEigen { values, vectors })
}

/// Householder reflector `I − β v vᵀ` acting on indices `start..n`.
struct Reflector {
    start: usize,
    v: Vec<f64>,
    beta: f64,
}

/// In-place reduction to tridiagonal form, full symmetric storage.
fn tridiagonalize(w: &mut DenseMatrix) -> Vec<Reflector> {
    let n = w.n_rows();
    let mut out = Vec::new();
    for k in 0..n.saturating_sub(2) {
        let start = k + 1;
        let x: Vec<f64> = w.row(k)[start..].to_vec();
        let norm = norm2(&x);
        if norm == 0.0 {
            continue;
        }
        let alpha = if x[0] >= 0.0 { -norm } else { norm };
        let mut v = x;
        v[0] -= alpha;
        let vtv = dot(&v, &v);
        if vtv == 0.0 {
            continue;
        }
        let beta = 2.0 / vtv;
        let m = n - start;
        // p = β A22 v
        let mut p = vec![0.0; m];
        for (i, pi) in p.iter_mut().enumerate() {
            *pi = beta * dot(&w.row(start + i)[start..], &v);
        }
        let kappa = 0.5 * beta * dot(&p, &v);
        let wv: Vec<f64> = p.iter().zip(&v).map(|(pi, vi)| pi - kappa * vi).collect();
        // A22 -= v wᵀ + w vᵀ
        for i in 0..m {
            let row = &mut w.row_mut(start + i)[start..];
            axpy(-v[i], &wv, row);
            axpy(-wv[i], &v, row);
        }
        for j in start..n {
            w[(k, j)] = 0.0;
            w[(j, k)] = 0.0;
        }
        w[(k, start)] = alpha;
        w[(start, k)] = alpha;
        out.push(Reflector { start, v, beta });
    }
    out
}

/// Applies `H_0 ⋯ H_{n-3}` to the rows of `z`.
fn back_transform(z: &mut DenseMatrix, reflectors: &[Reflector]) {
    let ncols = z.n_cols();
    for r in reflectors.iter().rev() {
        let mut acc = vec![0.0; ncols];
        for (i, vi) in r.v.iter().enumerate() {
            axpy(*vi, z.row(r.start + i), &mut acc);
        }
        for (i, vi) in r.v.iter().enumerate() {
            axpy(-r.beta * vi, &acc, z.row_mut(r.start + i));
        }
    }
}

/// Implicit QL with Wilkinson-style shifts on the tridiagonal (d, e), where `e[i]`
/// couples `i` and `i + 1`. Rotations are accumulated into the rows of `zt`.
fn tql(d: &mut [f64], e: &mut [f64], mut zt: Option<&mut DenseMatrix>) -> Result<()> {
    let n = d.len();
    let eps = f64::EPSILON;
    let mut f = 0.0;
    let mut tst1 = 0.0_f64;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 && e[m].abs() > eps * tst1 {
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > MAX_QL_ITERS {
                    return Err(Error::NoConvergence { method: "tridiagonal QL", iterations: iter, residual: e[l].abs() });
                }
                let g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    if let Some(z) = zt.as_deref_mut() {
                        rotate_rows(z, i, i + 1, c, s);
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

#[inline]
fn rotate_rows(z: &mut DenseMatrix, i: usize, j: usize, c: f64, s: f64) {
    let n = z.n_cols();
    let data = z.as_mut_slice();
    let (lo, hi) = data.split_at_mut(j * n);
    let ri = &mut lo[i * n..(i + 1) * n];
    let rj = &mut hi[..n];
    for (a, b) in ri.iter_mut().zip(rj.iter_mut()) {
        let h = *b;
        *b = s * *a + c * h;
        *a = c * *a - s * h;
    }
}
