//! PCA and the low-rank generalized eigenproblem `Γ g = λ Σ g`.
//!
//! `Γ = X̃ᵀ K X̃` is built from a slice kernel `K = L Lᵀ` on the centered data
//! `X̃`, and `Σ = X̃ᵀX̃ / n + ridge · I`. The factor `X̃ᵀL` is compressed by
//! the randomized factorization, so `Γ ≈ U S² Uᵀ` is known through `p × d`
//! quantities only.

use serde::{Deserialize, Serialize};

use crate::arsvd::{arsvd_fixed, factorize, ArsvdConfig, RankChoice};
use crate::error::{Error, Result};
use crate::linalg::sym_eigen;
use crate::matrix::{axpy, dot, matmul, matmul_tn, matvec, matvec_t, norm2, DenseMatrix};
use crate::select::SelectionReport;

/// Subtracts column means; returns the centered copy and the means.
pub fn center_columns(x: &DenseMatrix) -> (DenseMatrix, Vec<f64>) {
    let means = x.col_means();
    let mut c = x.clone();
    c.map_cols(|j, v| v - means[j]);
    (c, means)
}

#[derive(Debug, Clone)]
pub struct PcaResult {
    /// p × d loadings with orthonormal columns.
    pub components: DenseMatrix,
    /// `s² / n` per component.
    pub explained_variance: Vec<f64>,
    /// n × d principal component scores `X̃ V`.
    pub scores: DenseMatrix,
    pub means: Vec<f64>,
    /// Columns that are constant, hence contribute nothing.
    pub constant_columns: Vec<usize>,
    pub selection: Option<SelectionReport>,
    pub iterations: usize,
}

/// Principal components of the column-centered data.
pub fn pca(x: &DenseMatrix, cfg: &ArsvdConfig, choice: &RankChoice) -> Result<PcaResult> {
    let (xc, means) = center_columns(x);
    let constant_columns =
        (0..x.n_cols()).filter(|&j| xc.col(j).iter().all(|v| v.abs() <= 1e-12 * (1.0 + means[j].abs()))).collect();
    let (f, selection) = factorize(&xc, cfg, choice)?;
    let n = x.n_rows() as f64;
    let mut scores = f.u.clone();
    scores.scale_cols(&f.s);
    Ok(PcaResult {
        explained_variance: f.s.iter().map(|s| s * s / n).collect(),
        components: f.v,
        scores,
        means,
        constant_columns,
        selection,
        iterations: f.iterations,
    })
}

/// How the response is cut into slices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SliceSpec {
    /// Roughly equal-count slices of the sorted response; tied values stay together.
    Quantile(usize),
    /// One slice per distinct response value.
    Categorical,
}

/// Slice kernel `K = Σ_h 1_h 1_hᵀ / (n n_h)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SirKernel {
    pub n: usize,
    /// Member indices of every non-empty slice.
    pub slices: Vec<Vec<usize>>,
    /// Requested slices that came out empty and were dropped.
    pub empty_dropped: usize,
}

impl SirKernel {
    pub fn from_response(y: &[f64], slicing: SliceSpec) -> Result<Self> {
        let n = y.len();
        if n < 2 {
            return Err(Error::input("slicing needs at least 2 observations"));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("response has non-finite entries"));
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| y[a].total_cmp(&y[b]).then(a.cmp(&b)));
        let mut slices: Vec<Vec<usize>> = Vec::new();
        let mut empty_dropped = 0;
        match slicing {
            SliceSpec::Categorical => {
                for &i in &order {
                    match slices.last_mut() {
                        Some(s) if y[s[0]] == y[i] => s.push(i),
                        _ => slices.push(vec![i]),
                    }
                }
            }
            SliceSpec::Quantile(h) => {
                if h == 0 {
                    return Err(Error::config("need at least one slice"));
                }
                let mut start = 0;
                for k in 1..=h {
                    let mut end = (k * n + h / 2) / h;
                    end = end.clamp(start, n);
                    while end > start && end < n && y[order[end]] == y[order[end - 1]] {
                        end += 1;
                    }
                    if k == h {
                        end = n;
                    }
                    if end > start {
                        slices.push(order[start..end].to_vec());
                    } else {
                        empty_dropped += 1;
                    }
                    start = end;
                }
            }
        }
        Ok(Self { n, slices, empty_dropped })
    }

    /// Slice sizes.
    pub fn sizes(&self) -> Vec<usize> {
        self.slices.iter().map(Vec::len).collect()
    }

    /// `L` with `K = L Lᵀ`: column `h` is `1_h / √(n n_h)`.
    pub fn sqrt_factor(&self) -> DenseMatrix {
        let mut l = DenseMatrix::zeros(self.n, self.slices.len());
        for (h, s) in self.slices.iter().enumerate() {
            let w = 1.0 / ((self.n * s.len()) as f64).sqrt();
            for &i in s {
                l[(i, h)] = w;
            }
        }
        l
    }

    /// Dense `n × n` kernel.
    pub fn dense(&self) -> DenseMatrix {
        let l = self.sqrt_factor();
        crate::matrix::matmul_nt(&l, &l).expect("square factor")
    }
}

/// Reduction of the generalized problem to a `d × d` symmetric one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Reduction {
    /// `Σ⁻¹ U` by conjugate gradients, then `N = S Uᵀ Σ⁻¹ U S`; exact on the
    /// column space of `Γ`.
    #[default]
    Exact,
    /// `M = S⁻¹ Uᵀ Σ U S⁻¹` and `g = U S⁻¹ e`; restricts `g` to `span(U)`.
    Galerkin,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenEigConfig {
    /// Directions to return; `None` keeps every direction of `Γ`'s numerical rank.
    pub r: Option<usize>,
    pub ridge: f64,
    pub reduction: Reduction,
    /// Singular values of `X̃ᵀL` below `rank_rtol · s₁` are dropped.
    pub rank_rtol: f64,
    pub cg_tol: f64,
    pub cg_max_iter: usize,
}

impl Default for GenEigConfig {
    fn default() -> Self {
        Self { r: None, ridge: 0.0, reduction: Reduction::Exact, rank_rtol: 1e-10, cg_tol: 1e-13, cg_max_iter: 0 }
    }
}

#[derive(Debug, Clone)]
pub struct GenEigResult {
    /// p × r directions with unit Euclidean norm.
    pub directions: DenseMatrix,
    pub eigenvalues: Vec<f64>,
    /// Numerical rank of `Γ` after thresholding.
    pub gamma_rank: usize,
    /// Singular values of `X̃ᵀL` dropped below `rank_rtol · s₁`.
    pub dropped_directions: usize,
    /// `Γ` was numerically zero (for example a constant response).
    pub degenerate: bool,
    pub means: Vec<f64>,
}

/// Preconditioned conjugate gradients for `Σ w = b` with `Σ v = X̃ᵀX̃v/n + ridge·v`.
fn cg_solve(xc: &DenseMatrix, ridge: f64, diag: &[f64], b: &[f64], tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    let n = xc.n_rows() as f64;
    let apply = |v: &[f64]| -> Result<Vec<f64>> {
        let mut out = matvec_t(xc, &matvec(xc, v)?)?;
        for (o, vi) in out.iter_mut().zip(v) {
            *o = *o / n + ridge * vi;
        }
        Ok(out)
    };
    let bnorm = norm2(b);
    let mut w = vec![0.0; b.len()];
    if bnorm == 0.0 {
        return Ok(w);
    }
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(diag).map(|(a, d)| a / d).collect();
    let mut dir = z.clone();
    let mut rz = dot(&r, &z);
    for it in 0..max_iter {
        let ad = apply(&dir)?;
        let curv = dot(&dir, &ad);
        if !(curv > 0.0) {
            return Err(Error::Numerical(format!(
                "covariance is singular along a search direction at CG step {it}; set a ridge, e.g. 1e-6 · trace(Σ) / p"
            )));
        }
        let alpha = rz / curv;
        axpy(alpha, &dir, &mut w);
        axpy(-alpha, &ad, &mut r);
        if norm2(&r) <= tol * bnorm {
            return Ok(w);
        }
        z = r.iter().zip(diag).map(|(a, d)| a / d).collect();
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for (d, zi) in dir.iter_mut().zip(&z) {
            *d = zi + beta * *d;
        }
    }
    Err(Error::NoConvergence { method: "conjugate gradients", iterations: max_iter, residual: norm2(&r) / bnorm })
}

/// Leading generalized eigenpairs of `(Γ, Σ)` for the slice kernel `kernel`.
pub fn geneig_lowrank(
    x: &DenseMatrix,
    kernel: &SirKernel,
    cfg: &ArsvdConfig,
    gcfg: &GenEigConfig,
) -> Result<GenEigResult> {
    let (n, p) = x.shape();
    if kernel.n != n {
        return Err(Error::DimensionMismatch { op: "geneig", left: (n, p), right: (kernel.n, kernel.n) });
    }
    if !(gcfg.ridge >= 0.0 && gcfg.ridge.is_finite()) {
        return Err(Error::config("ridge must be finite and non-negative"));
    }
    let (xc, means) = center_columns(x);
    let m = matmul_tn(&xc, &kernel.sqrt_factor())?;
    let empty = |degenerate| GenEigResult {
        directions: DenseMatrix::zeros(p, 0),
        eigenvalues: vec![],
        gamma_rank: 0,
        dropped_directions: 0,
        degenerate,
        means: means.clone(),
    };
    if m.max_abs() <= 1e-13 * (1.0 + xc.max_abs()) {
        return Ok(empty(true));
    }
    let width = m.n_cols().min(p);
    let fcfg = ArsvdConfig { d_max: width, delta: 0, ..*cfg };
    let f = arsvd_fixed(&m, width, cfg.t_max, &fcfg)?;
    let s1 = f.s[0];
    let d = f.s.iter().take_while(|&&s| s > gcfg.rank_rtol * s1).count();
    let dropped_directions = width - d;
    if let Some(r) = gcfg.r {
        if r == 0 || r > d {
            return Err(Error::config(format!("requested {r} directions but the slice covariance has rank {d}")));
        }
    }
    let u = f.u.leading_cols(d);
    let s = &f.s[..d];

    let (mut vals, mut dirs) = match gcfg.reduction {
        Reduction::Exact => {
            let diag: Vec<f64> =
                (0..p).map(|j| (dot(&xc.col(j), &xc.col(j)) / n as f64 + gcfg.ridge).max(f64::MIN_POSITIVE)).collect();
            let max_iter = if gcfg.cg_max_iter == 0 { 10 * p + 100 } else { gcfg.cg_max_iter };
            let mut w = DenseMatrix::zeros(p, d);
            for k in 0..d {
                w.set_col(k, &cg_solve(&xc, gcfg.ridge, &diag, &u.col(k), gcfg.cg_tol, max_iter)?);
            }
            let utw = matmul_tn(&u, &w)?;
            let nmat = DenseMatrix::from_fn(d, d, |i, j| 0.5 * s[i] * s[j] * (utw[(i, j)] + utw[(j, i)]));
            let eig = sym_eigen(&nmat, true)?;
            let b = eig.vectors.expect("vectors requested");
            let mut ws = w;
            ws.scale_cols(s);
            (eig.values, matmul(&ws, &b)?)
        }
        Reduction::Galerkin => {
            let xu = matmul(&xc, &u)?;
            let mut sig = matmul_tn(&xu, &xu)?;
            sig.scale(1.0 / n as f64);
            let mmat =
                DenseMatrix::from_fn(d, d, |i, j| (sig[(i, j)] + if i == j { gcfg.ridge } else { 0.0 }) / (s[i] * s[j]));
            let eig = sym_eigen(&mmat, true)?;
            if eig.values[d - 1] <= 1e-12 * eig.values[0].abs() {
                return Err(Error::Numerical(
                    "reduced covariance is numerically singular; set a ridge, e.g. 1e-6 · trace(Σ) / p".into(),
                ));
            }
            let e = eig.vectors.expect("vectors requested");
            let mut us = u.clone();
            us.scale_cols(&s.iter().map(|v| 1.0 / v).collect::<Vec<_>>());
            // eigenvalues of M are reciprocal; largest λ comes from the smallest μ
            let order: Vec<usize> = (0..d).rev().collect();
            let lam: Vec<f64> = order.iter().map(|&k| 1.0 / eig.values[k]).collect();
            (lam, matmul(&us, &e.select_cols(&order))?)
        }
    };
    let keep: Vec<usize> = (0..vals.len()).filter(|&k| vals[k] > 0.0 && vals[k].is_finite()).collect();
    let r = gcfg.r.unwrap_or(d).min(keep.len());
    let keep = &keep[..r];
    vals = keep.iter().map(|&k| vals[k]).collect();
    dirs = dirs.select_cols(keep);
    for k in 0..r {
        let mut col = dirs.col(k);
        let nrm = norm2(&col);
        let imax = (0..p).fold(0, |b, i| if col[i].abs() > col[b].abs() { i } else { b });
        let sign = if col[imax] < 0.0 { -1.0 } else { 1.0 };
        col.iter_mut().for_each(|v| *v *= sign / nrm);
        dirs.set_col(k, &col);
    }
    Ok(GenEigResult { directions: dirs, eigenvalues: vals, gamma_rank: d, dropped_directions, degenerate: false, means })
}

/// Dense `Γ = X̃ᵀ K X̃` and `Σ = X̃ᵀX̃/n + ridge·I`, for checking small problems.
pub fn dense_pencil(x: &DenseMatrix, kernel: &SirKernel, ridge: f64) -> Result<(DenseMatrix, DenseMatrix)> {
    let (xc, _) = center_columns(x);
    let m = matmul_tn(&xc, &kernel.sqrt_factor())?;
    let gamma = crate::matrix::matmul_nt(&m, &m)?;
    let mut sigma = matmul_tn(&xc, &xc)?;
    sigma.scale(1.0 / x.n_rows() as f64);
    for i in 0..x.n_cols() {
        sigma[(i, i)] += ridge;
    }
    Ok((gamma, sigma))
}

/// `max_k ‖Γ g_k − λ_k Σ g_k‖ / ‖Γ g_k‖` over the returned pairs.
pub fn relative_residual(gamma: &DenseMatrix, sigma: &DenseMatrix, res: &GenEigResult) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for k in 0..res.eigenvalues.len() {
        let g = res.directions.col(k);
        let mut r = matvec(gamma, &g)?;
        let scale = norm2(&r).max(f64::MIN_POSITIVE);
        axpy(-res.eigenvalues[k], &matvec(sigma, &g)?, &mut r);
        worst = worst.max(norm2(&r) / scale);
    }
    Ok(worst)
}
