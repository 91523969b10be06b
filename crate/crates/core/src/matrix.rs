//! Row-major dense matrix and the products every other module is built on.
//!
//! Products never materialize a transpose: [`matmul_tn`] reads `a` column-wise
//! through strides and [`matmul_nt`] reads `b` the same way. Large products are
//! split into fixed 64-row output panels that run on the rayon pool; the panel
//! boundaries do not depend on the thread count, so results are bitwise
//! identical for any number of threads.

use std::fmt;
use std::ops::{Index, IndexMut};

use rayon::prelude::*;

use crate::error::{Error, Result};

const PANEL_ROWS: usize = 64;
const PARALLEL_FLOPS: usize = 1 << 22;

#[derive(Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    /// Builds a matrix from row-major data, rejecting wrong lengths and non-finite entries.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::BadLength { rows, cols, len: data.len() });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { row: pos / cols.max(1), col: pos % cols.max(1) });
        }
        Ok(Self { rows, cols, data })
    }

    /// Internal constructor for data produced by finite arithmetic on finite inputs.
    pub(crate) fn from_vec_unchecked(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        Self { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            m.data[i * n + i] = d;
        }
        m
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(n * p);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != p {
                return Err(Error::input(format!("row {i} has {} entries, expected {p}", r.len())));
            }
            data.extend_from_slice(r);
        }
        Self::new(n, p, data)
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Column matrix from a slice.
    pub fn column(values: &[f64]) -> Self {
        Self { rows: values.len(), cols: 1, data: values.to_vec() }
    }

    pub fn from_columns(cols: &[Vec<f64>]) -> Result<Self> {
        let p = cols.len();
        let n = cols.first().map_or(0, Vec::len);
        if cols.iter().any(|c| c.len() != n) {
            return Err(Error::input("columns have unequal lengths"));
        }
        let m = Self::from_fn(n, p, |i, j| cols[j][i]);
        Self::new(n, p, m.data)
    }

    #[inline]
    pub fn n_rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn n_cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn rows_iter(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols.max(1)).take(self.rows)
    }

    pub fn col(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.data[i * self.cols + j]).collect()
    }

    pub fn set_col(&mut self, j: usize, values: &[f64]) {
        assert_eq!(values.len(), self.rows);
        for (i, v) in values.iter().enumerate() {
            self.data[i * self.cols + j] = *v;
        }
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        t
    }

    /// Copies the leading `k` columns.
    pub fn leading_cols(&self, k: usize) -> Self {
        assert!(k <= self.cols);
        self.select_cols(&(0..k).collect::<Vec<_>>())
    }

    pub fn select_cols(&self, idx: &[usize]) -> Self {
        let mut out = Vec::with_capacity(self.rows * idx.len());
        for r in self.rows_iter() {
            out.extend(idx.iter().map(|&j| r[j]));
        }
        Self::from_vec_unchecked(self.rows, idx.len(), out)
    }

    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let mut out = Vec::with_capacity(self.cols * idx.len());
        for &i in idx {
            out.extend_from_slice(self.row(i));
        }
        Self::from_vec_unchecked(idx.len(), self.cols, out)
    }

    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> Self {
        let mut out = Vec::with_capacity(rows.len() * cols.len());
        for &i in rows {
            let r = self.row(i);
            out.extend(cols.iter().map(|&j| r[j]));
        }
        Self::from_vec_unchecked(rows.len(), cols.len(), out)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.frobenius_norm_sq().sqrt()
    }

    pub fn frobenius_norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn scale(&mut self, c: f64) {
        self.data.iter_mut().for_each(|v| *v *= c);
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut m = self.clone();
        m.scale(c);
        m
    }

    /// Multiplies column `j` by `d[j]` in place.
    pub fn scale_cols(&mut self, d: &[f64]) {
        assert_eq!(d.len(), self.cols);
        for r in self.data.chunks_exact_mut(self.cols.max(1)) {
            r.iter_mut().zip(d).for_each(|(v, s)| *v *= s);
        }
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, "sub", |a, b| a - b)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, "add", |a, b| a + b)
    }

    fn zip_with(&self, other: &Self, op: &'static str, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.shape() != other.shape() {
            return Err(Error::DimensionMismatch { op, left: self.shape(), right: other.shape() });
        }
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect();
        Ok(Self::from_vec_unchecked(self.rows, self.cols, data))
    }

    /// `‖selfᵀ self − I‖_max`, the orthonormality defect of the columns.
    pub fn orthonormality_defect(&self) -> f64 {
        let g = matmul_tn(self, self).expect("square gram");
        let mut worst = 0.0_f64;
        for i in 0..g.rows {
            for j in 0..g.cols {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g[(i, j)] - target).abs());
            }
        }
        worst
    }

    /// Column means.
    pub fn col_means(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.cols];
        for r in self.rows_iter() {
            m.iter_mut().zip(r).for_each(|(a, v)| *a += v);
        }
        let n = self.rows.max(1) as f64;
        m.iter_mut().for_each(|a| *a /= n);
        m
    }

    /// Applies `f` to every column `j` with its index: `row[j] = f(j, row[j])`.
    pub fn map_cols(&mut self, f: impl Fn(usize, f64) -> f64) {
        for r in self.data.chunks_exact_mut(self.cols.max(1)) {
            for (j, v) in r.iter_mut().enumerate() {
                *v = f(j, *v);
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "DenseMatrix {}x{} [", self.rows, self.cols)?;
        for r in self.rows_iter().take(8) {
            writeln!(f, "  {:?}", &r[..r.len().min(8)])?;
        }
        write!(f, "]")
    }
}

/// Strided view for the gemm kernel: element (i, j) at `ptr[i*rs + j*cs]`.
#[derive(Clone, Copy)]
struct View<'a> {
    data: &'a [f64],
    rows: usize,
    cols: usize,
    rs: isize,
    cs: isize,
}

impl<'a> View<'a> {
    fn plain(m: &'a DenseMatrix) -> Self {
        Self { data: &m.data, rows: m.rows, cols: m.cols, rs: m.cols as isize, cs: 1 }
    }

    fn transposed(m: &'a DenseMatrix) -> Self {
        Self { data: &m.data, rows: m.cols, cols: m.rows, rs: 1, cs: m.cols as isize }
    }

    /// Rows `start..end` of this view, as an offset into the same storage.
    fn row_range(self, start: usize, end: usize) -> (Self, usize) {
        (Self { rows: end - start, ..self }, start * self.rs as usize)
    }
}

fn gemm_into(a: View<'_>, b: View<'_>, out: &mut [f64], alpha: f64) {
    let (m, k, n) = (a.rows, a.cols, b.cols);
    debug_assert_eq!(out.len(), m * n);
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        out.iter_mut().for_each(|v| *v = 0.0);
        return;
    }
    // SAFETY: strides describe in-bounds elements of `a.data`, `b.data` and `out`
    // (checked by the shapes of the owning matrices); `out` is exclusively borrowed.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.data.as_ptr(),
            a.rs,
            a.cs,
            b.data.as_ptr(),
            b.rs,
            b.cs,
            0.0,
            out.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

fn gemm(a: View<'_>, b: View<'_>) -> DenseMatrix {
    let (m, k, n) = (a.rows, a.cols, b.cols);
    let mut out = vec![0.0; m * n];
    if m * n * k < PARALLEL_FLOPS || m <= PANEL_ROWS {
        gemm_into(a, b, &mut out, 1.0);
    } else {
        out.par_chunks_mut(PANEL_ROWS * n).enumerate().for_each(|(p, chunk)| {
            let start = p * PANEL_ROWS;
            let end = (start + PANEL_ROWS).min(m);
            let (sub, offset) = a.row_range(start, end);
            let sub = View { data: &a.data[offset..], ..sub };
            gemm_into(sub, b, chunk, 1.0);
        });
    }
    DenseMatrix::from_vec_unchecked(m, n, out)
}

/// `a · b`.
pub fn matmul(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    if a.cols != b.rows {
        return Err(Error::DimensionMismatch { op: "matmul", left: a.shape(), right: b.shape() });
    }
    Ok(gemm(View::plain(a), View::plain(b)))
}

/// `aᵀ · b`, reading `a` through strides.
pub fn matmul_tn(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    if a.rows != b.rows {
        return Err(Error::DimensionMismatch { op: "matmul_tn", left: a.shape(), right: b.shape() });
    }
    Ok(gemm(View::transposed(a), View::plain(b)))
}

/// `a · bᵀ`, reading `b` through strides.
pub fn matmul_nt(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    if a.cols != b.cols {
        return Err(Error::DimensionMismatch { op: "matmul_nt", left: a.shape(), right: b.shape() });
    }
    Ok(gemm(View::plain(a), View::transposed(b)))
}

/// `a · x` for a vector `x`.
pub fn matvec(a: &DenseMatrix, x: &[f64]) -> Result<Vec<f64>> {
    if a.cols != x.len() {
        return Err(Error::DimensionMismatch { op: "matvec", left: a.shape(), right: (x.len(), 1) });
    }
    Ok(a.rows_iter().map(|r| dot(r, x)).collect())
}

/// `aᵀ · x` for a vector `x`.
pub fn matvec_t(a: &DenseMatrix, x: &[f64]) -> Result<Vec<f64>> {
    if a.rows != x.len() {
        return Err(Error::DimensionMismatch { op: "matvec_t", left: a.shape(), right: (x.len(), 1) });
    }
    let mut out = vec![0.0; a.cols];
    for (r, &xi) in a.rows_iter().zip(x) {
        axpy(xi, r, &mut out);
    }
    Ok(out)
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in ca.by_ref().zip(cb.by_ref()) {
        for l in 0..4 {
            acc[l] += x[l] * y[l];
        }
    }
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += alpha * xi);
}

pub fn norm2(x: &[f64]) -> f64 {
    // scaled to avoid overflow on large entries
    let scale = x.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    let s: f64 = x.iter().map(|v| (v / scale) * (v / scale)).sum();
    scale * s.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(a: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
        DenseMatrix::from_fn(a.n_rows(), b.n_cols(), |i, j| {
            let mut s = 0.0;
            for k in 0..a.n_cols() {
                s += a[(i, k)] * b[(k, j)];
            }
            s
        })
    }

    fn pseudo(rows: usize, cols: usize, salt: u64) -> DenseMatrix {
        let mut state = salt.wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1;
        DenseMatrix::from_fn(rows, cols, |_, _| {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state % 2001) as f64 / 1000.0 - 1.0
        })
    }

    #[test]
    fn hand_product() {
        let a = DenseMatrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        let b = DenseMatrix::from_rows(&[[5.0], [6.0]]).unwrap();
        let c = matmul(&a, &b).unwrap();
        assert_eq!(c.as_slice(), &[17.0, 39.0]);
    }

    #[test]
    fn identity_is_neutral() {
        let a = pseudo(7, 5, 3);
        assert_eq!(matmul(&DenseMatrix::identity(7), &a).unwrap(), a);
        assert_eq!(matmul(&a, &DenseMatrix::identity(5)).unwrap(), a);
    }

    #[test]
    fn large_product_matches_naive_loop() {
        let a = pseudo(500, 500, 11);
        let b = pseudo(500, 500, 12);
        let fast = matmul(&a, &b).unwrap();
        let slow = naive(&a, &b);
        assert!(fast.sub(&slow).unwrap().max_abs() <= 1e-10);
    }

    #[test]
    fn transposed_products_match_explicit_transpose() {
        let a = pseudo(130, 40, 1);
        let b = pseudo(130, 25, 2);
        let c = pseudo(60, 40, 3);
        let tn = matmul_tn(&a, &b).unwrap();
        assert!(tn.sub(&naive(&a.transpose(), &b)).unwrap().max_abs() < 1e-12);
        let nt = matmul_nt(&a, &c).unwrap();
        assert!(nt.sub(&naive(&a, &c.transpose())).unwrap().max_abs() < 1e-12);
        let big = pseudo(300, 200, 4);
        let bt = matmul_tn(&big, &big).unwrap();
        assert!(bt.sub(&naive(&big.transpose(), &big)).unwrap().max_abs() < 1e-10);
    }

    #[test]
    fn dimension_mismatch_names_shapes() {
        let a = DenseMatrix::zeros(2, 3);
        let err = matmul(&a, &a).unwrap_err();
        assert_eq!(err, Error::DimensionMismatch { op: "matmul", left: (2, 3), right: (2, 3) });
        assert!(err.to_string().contains("(2, 3)"));
    }

    #[test]
    fn rejects_non_finite_and_bad_length() {
        assert!(matches!(DenseMatrix::new(2, 2, vec![0.0; 3]), Err(Error::BadLength { .. })));
        assert_eq!(
            DenseMatrix::new(2, 2, vec![0.0, 1.0, f64::NAN, 0.0]).unwrap_err(),
            Error::NonFinite { row: 1, col: 0 }
        );
    }

    #[test]
    fn thread_count_does_not_change_bits() {
        let a = pseudo(400, 300, 5);
        let b = pseudo(300, 90, 6);
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let c1 = one.install(|| matmul(&a, &b).unwrap());
        let c4 = four.install(|| matmul(&a, &b).unwrap());
        assert_eq!(c1, c4);
    }
}
