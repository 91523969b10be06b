//! Two-stage randomized SVD.
//!
//! Stage one draws a Gaussian block `Ω ∈ ℝ^{n×ℓ}` in sample space and pushes it
//! through powers of `XXᵀ`, re-orthonormalizing after every product with `X` or
//! `Xᵀ`. Stage two projects onto the resulting basis `Q`, takes the exact SVD
//! of the small `p×ℓ` matrix `B = XᵀQ = U_B Σ Wᵀ`, and reads off
//! `X ≈ (QW) Σ U_Bᵀ`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{qr_thin, svd_exact};
use crate::matrix::{matmul, matmul_tn, DenseMatrix};
use crate::rng::{gaussian_matrix, RngSeed};
use crate::select::{self, SelectConfig, SelectionReport};

/// Stream tag of the stage-one Gaussian block.
pub(crate) const OMEGA_TAG: u64 = 0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArsvdConfig {
    /// Upper bound on the rank.
    pub d_max: usize,
    /// Maximum number of power iterations.
    pub t_max: usize,
    /// Oversampling beyond `d_max`.
    pub delta: usize,
    pub seed: RngSeed,
}

impl Default for ArsvdConfig {
    fn default() -> Self {
        Self { d_max: 20, t_max: 10, delta: 10, seed: RngSeed::new(0) }
    }
}

impl ArsvdConfig {
    pub fn new(d_max: usize, t_max: usize, seed: impl Into<RngSeed>) -> Self {
        Self { d_max, t_max, seed: seed.into(), ..Self::default() }
    }

    pub fn with_delta(mut self, delta: usize) -> Self {
        self.delta = delta;
        self
    }

    pub fn with_seed(mut self, seed: impl Into<RngSeed>) -> Self {
        self.seed = seed.into();
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.d_max == 0 {
            return Err(Error::config("d_max must be at least 1"));
        }
        if self.t_max == 0 {
            return Err(Error::config("t_max must be at least 1"));
        }
        Ok(())
    }

    /// Working width `ℓ = min(d_max + Δ, min(n, p))` and whether it was clamped.
    pub fn working_width(&self, n: usize, p: usize) -> (usize, bool) {
        let want = self.d_max + self.delta;
        let cap = n.min(p);
        (want.min(cap), want > cap)
    }
}

/// Orthonormal basis of the `t`-th power block `(XXᵀ)^t Ω`.
#[derive(Debug, Clone)]
pub struct PowerBlock {
    pub t: usize,
    pub basis: DenseMatrix,
}

/// All power blocks of one sweep plus the flags raised while building them.
#[derive(Debug, Clone)]
pub struct PowerBlocks {
    pub blocks: Vec<PowerBlock>,
    pub width: usize,
    pub clamped: bool,
    /// `x` was identically zero; every block is the orthonormalized `Ω`.
    pub zero_input: bool,
}

/// Rank-`d` factorization `X̂ = u · diag(s) · vᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct LowRankFactorization {
    /// n×d left factor.
    pub u: DenseMatrix,
    pub s: Vec<f64>,
    /// p×d right factor.
    pub v: DenseMatrix,
    pub rank: usize,
    /// Power iterations used.
    pub iterations: usize,
}

impl LowRankFactorization {
    pub fn empty(n: usize, p: usize) -> Self {
        Self { u: DenseMatrix::zeros(n, 0), s: vec![], v: DenseMatrix::zeros(p, 0), rank: 0, iterations: 0 }
    }

    pub fn reconstruct(&self) -> DenseMatrix {
        let mut us = self.u.clone();
        us.scale_cols(&self.s);
        crate::matrix::matmul_nt(&us, &self.v).expect("consistent factor shapes")
    }

    /// Keeps the leading `d` triplets.
    pub fn truncate(&mut self, d: usize) {
        if d < self.rank {
            self.u = self.u.leading_cols(d);
            self.v = self.v.leading_cols(d);
            self.s.truncate(d);
            self.rank = d;
        }
    }
}

fn orthonormalize(m: &DenseMatrix) -> Result<DenseMatrix> {
    Ok(qr_thin(m)?.q)
}

/// Incremental power iteration; block `t` is derived from block `t − 1`.
pub(crate) struct PowerSweep<'a> {
    x: &'a DenseMatrix,
    q: DenseMatrix,
    t: usize,
    /// Cached `Xᵀ q` for the current block.
    projected: Option<DenseMatrix>,
    zero_input: bool,
}

impl<'a> PowerSweep<'a> {
    /// Starts from the orthonormalized `omega`.
    pub(crate) fn new(x: &'a DenseMatrix, omega: &DenseMatrix) -> Result<Self> {
        if omega.n_rows() != x.n_rows() {
            return Err(Error::DimensionMismatch { op: "power sweep", left: x.shape(), right: omega.shape() });
        }
        let zero_input = x.max_abs() == 0.0;
        Ok(Self { x, q: orthonormalize(omega)?, t: 0, projected: None, zero_input })
    }

    pub(crate) fn t(&self) -> usize {
        self.t
    }

    pub(crate) fn basis(&self) -> &DenseMatrix {
        &self.q
    }

    pub(crate) fn zero_input(&self) -> bool {
        self.zero_input
    }

    /// One application of `XXᵀ`, orthonormalizing after each factor.
    pub(crate) fn advance(&mut self) -> Result<()> {
        self.t += 1;
        if self.zero_input {
            return Ok(());
        }
        let g = match self.projected.take() {
            Some(g) => g,
            None => matmul_tn(self.x, &self.q)?,
        };
        let qg = orthonormalize(&g)?;
        let f = matmul(self.x, &qg)?;
        self.q = orthonormalize(&f)?;
        Ok(())
    }

    /// `B = Xᵀ Q` for the current block.
    pub(crate) fn projected(&mut self) -> Result<&DenseMatrix> {
        if self.projected.is_none() {
            self.projected = Some(matmul_tn(self.x, &self.q)?);
        }
        Ok(self.projected.as_ref().expect("just filled"))
    }

    /// Rayleigh–Ritz triplets of `X` on the current basis, all `ℓ` of them.
    pub(crate) fn ritz(&mut self) -> Result<LowRankFactorization> {
        let t = self.t;
        let b = self.projected()?.clone();
        let f = svd_exact(&b)?;
        let u = matmul(&self.q, &f.v)?;
        let rank = f.s.len();
        let mut out = LowRankFactorization { u, s: f.s, v: f.u, rank, iterations: t };
        fix_signs(&mut out);
        Ok(out)
    }
}

/// Largest-magnitude entry of each `u` column made positive; `v` follows.
fn fix_signs(f: &mut LowRankFactorization) {
    let (n, p) = (f.u.n_rows(), f.v.n_rows());
    for k in 0..f.rank {
        let mut best = 0.0_f64;
        for i in 0..n {
            let val = f.u[(i, k)];
            if val.abs() > best.abs() {
                best = val;
            }
        }
        if best < 0.0 {
            for i in 0..n {
                f.u[(i, k)] = -f.u[(i, k)];
            }
            for j in 0..p {
                f.v[(j, k)] = -f.v[(j, k)];
            }
        }
    }
}

fn check_input(x: &DenseMatrix) -> Result<()> {
    if x.n_rows() == 0 || x.n_cols() == 0 {
        return Err(Error::input("empty data matrix"));
    }
    Ok(())
}

pub(crate) fn stage_one_omega(x: &DenseMatrix, cfg: &ArsvdConfig) -> DenseMatrix {
    let (width, _) = cfg.working_width(x.n_rows(), x.n_cols());
    gaussian_matrix(x.n_rows(), width, cfg.seed.substream(OMEGA_TAG))
}

/// Orthonormal power blocks for `t = 1 … t_max`.
pub fn power_blocks(x: &DenseMatrix, cfg: &ArsvdConfig) -> Result<PowerBlocks> {
    cfg.validate()?;
    check_input(x)?;
    let (width, clamped) = cfg.working_width(x.n_rows(), x.n_cols());
    let omega = stage_one_omega(x, cfg);
    let mut sweep = PowerSweep::new(x, &omega)?;
    let mut blocks = Vec::with_capacity(cfg.t_max);
    for _ in 0..cfg.t_max {
        sweep.advance()?;
        blocks.push(PowerBlock { t: sweep.t(), basis: sweep.basis().clone() });
    }
    Ok(PowerBlocks { blocks, width, clamped, zero_input: sweep.zero_input() })
}

/// Rank-`d` factorization from power block `t`.
pub fn arsvd_fixed(x: &DenseMatrix, d: usize, t: usize, cfg: &ArsvdConfig) -> Result<LowRankFactorization> {
    cfg.validate()?;
    check_input(x)?;
    let (width, _) = cfg.working_width(x.n_rows(), x.n_cols());
    if d == 0 || d > width {
        return Err(Error::config(format!("rank {d} outside 1..={width} (working width)")));
    }
    if t == 0 || t > cfg.t_max {
        return Err(Error::config(format!("iteration {t} outside 1..={}", cfg.t_max)));
    }
    let omega = stage_one_omega(x, cfg);
    let mut sweep = PowerSweep::new(x, &omega)?;
    while sweep.t() < t {
        sweep.advance()?;
    }
    let mut f = sweep.ritz()?;
    f.truncate(d);
    Ok(f)
}

/// Chooses `(t*, d*)` from the data, then factorizes at that choice.
pub fn arsvd_adaptive(x: &DenseMatrix, cfg: &ArsvdConfig) -> Result<(LowRankFactorization, SelectionReport)> {
    arsvd_adaptive_with(x, cfg, &SelectConfig::default())
}

pub fn arsvd_adaptive_with(
    x: &DenseMatrix,
    cfg: &ArsvdConfig,
    sel: &SelectConfig,
) -> Result<(LowRankFactorization, SelectionReport)> {
    cfg.validate()?;
    check_input(x)?;
    let report = select::select(x, cfg, sel)?;
    if report.degenerate_zero || report.d_star == 0 {
        return Ok((LowRankFactorization::empty(x.n_rows(), x.n_cols()), report));
    }
    let f = arsvd_fixed(x, report.d_star, report.t_star, cfg)?;
    Ok((f, report))
}

/// How the rank and iteration count of a factorization are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RankChoice {
    /// Data-driven `(t*, d*)`.
    Adaptive(SelectConfig),
    /// Caller-fixed rank and iteration count.
    Fixed { d: usize, t: usize },
}

impl Default for RankChoice {
    fn default() -> Self {
        Self::Adaptive(SelectConfig::default())
    }
}

/// Factorizes `x` according to `choice`; the selection report is present for
/// adaptive runs.
pub fn factorize(
    x: &DenseMatrix,
    cfg: &ArsvdConfig,
    choice: &RankChoice,
) -> Result<(LowRankFactorization, Option<SelectionReport>)> {
    match choice {
        RankChoice::Adaptive(sel) => {
            let (f, r) = arsvd_adaptive_with(x, cfg, sel)?;
            Ok((f, Some(r)))
        }
        RankChoice::Fixed { d, t } => Ok((arsvd_fixed(x, *d, *t, cfg)?, None)),
    }
}
