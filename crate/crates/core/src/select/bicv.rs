//! Bi-cross-validation with a 2×2 Gabriel holdout.
//!
//! Rows and columns are split in half once. Each of the four quadrants is held
//! out in turn as `A`; the diagonally opposite quadrant `D` is factorized, its
//! rank chosen by the stability change point, and `A` is predicted from the
//! off-diagonal quadrants as `B D⁺ C`.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arsvd::{ArsvdConfig, LowRankFactorization, PowerSweep, OMEGA_TAG};
use crate::error::{Error, Result};
use crate::matrix::{matmul, matmul_tn, DenseMatrix};
use crate::rng::{gaussian_matrix, RngSeed};

use super::stability::{changepoint_of, stability_sweep};
use super::SelectConfig;

pub(crate) const SPLIT_TAG: u64 = 200;
pub(crate) const BLOCK_TAG: u64 = 300;

/// Random halving of rows and columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BicvSplit {
    pub rows: [Vec<usize>; 2],
    pub cols: [Vec<usize>; 2],
}

impl BicvSplit {
    pub fn random(n: usize, p: usize, seed: RngSeed) -> Result<Self> {
        if n < 4 || p < 4 {
            return Err(Error::input(format!("bi-cross-validation needs at least 4 rows and columns, got {n}x{p}")));
        }
        let mut rng = seed.rng();
        let mut halve = |len: usize| {
            let mut idx: Vec<usize> = (0..len).collect();
            idx.shuffle(&mut rng);
            let second = idx.split_off(len / 2);
            let (mut a, mut b) = (idx, second);
            a.sort_unstable();
            b.sort_unstable();
            [a, b]
        };
        let rows = halve(n);
        let cols = halve(p);
        Ok(Self { rows, cols })
    }
}

/// Outcome for one held-out quadrant at one `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockOutcome {
    /// `‖A − B D⁺ C‖²_F`.
    pub error: f64,
    pub rank: usize,
    /// Every singular value of `D` fell below the pseudoinverse cutoff; `error = ‖A‖²_F`.
    pub collapsed: bool,
    pub weak_change_point: bool,
    /// `‖A‖²_F`, the error of predicting zero.
    pub held_out_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BicvTrace {
    pub t: usize,
    pub median_error: f64,
    pub median_rank: usize,
    /// Quadrants in order (0,0), (0,1), (1,0), (1,1) of the held-out block.
    pub blocks: Vec<BlockOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BicvReport {
    pub traces: Vec<BicvTrace>,
    pub t_star: usize,
    pub d_star: usize,
    /// Median over quadrants of `‖A‖²_F`.
    pub null_error: f64,
    /// The median error at `t*` is no better than predicting zero.
    pub no_signal: bool,
}

/// `‖A − (B V) S⁻¹ (Uᵀ C)‖²_F` with singular values below `rtol · s₁` dropped.
/// Returns the error and whether every value was dropped.
pub fn schur_error(
    a: &DenseMatrix,
    b: &DenseMatrix,
    c: &DenseMatrix,
    d: &LowRankFactorization,
    rtol: f64,
) -> Result<(f64, bool)> {
    let s1 = d.s.first().copied().unwrap_or(0.0);
    let keep: Vec<usize> = (0..d.rank).filter(|&k| s1 > 0.0 && d.s[k] > rtol * s1).collect();
    if keep.is_empty() {
        return Ok((a.frobenius_norm_sq(), true));
    }
    let v = d.v.select_cols(&keep);
    let u = d.u.select_cols(&keep);
    let mut bv = matmul(b, &v)?;
    let inv: Vec<f64> = keep.iter().map(|&k| 1.0 / d.s[k]).collect();
    bv.scale_cols(&inv);
    let utc = matmul_tn(&u, c)?;
    let pred = matmul(&bv, &utc)?;
    Ok((a.sub(&pred)?.frobenius_norm_sq(), false))
}

fn median_f64(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let m = xs.len();
    if m % 2 == 1 {
        xs[m / 2]
    } else {
        0.5 * (xs[m / 2 - 1] + xs[m / 2])
    }
}

/// Lower median for counts: the mean of the middle pair, rounded down.
fn median_count(mut xs: Vec<usize>) -> usize {
    xs.sort_unstable();
    let m = xs.len();
    if m % 2 == 1 {
        xs[m / 2]
    } else {
        (xs[m / 2 - 1] + xs[m / 2]) / 2
    }
}

/// Per-quadrant outcomes for `t = 1 … t_max`.
fn quadrant_sweep(
    x: &DenseMatrix,
    split: &BicvSplit,
    held: (usize, usize),
    cfg: &ArsvdConfig,
    sel: &SelectConfig,
    seed: RngSeed,
) -> Result<Vec<BlockOutcome>> {
    let (r, c) = held;
    let a = x.submatrix(&split.rows[r], &split.cols[c]);
    let b = x.submatrix(&split.rows[r], &split.cols[1 - c]);
    let cm = x.submatrix(&split.rows[1 - r], &split.cols[c]);
    let d = x.submatrix(&split.rows[1 - r], &split.cols[1 - c]);

    let d_max = cfg.d_max.min(d.n_rows().min(d.n_cols()));
    if d_max < 4 {
        return Err(Error::config(format!(
            "training block {}x{} leaves d_max = {d_max}; change point needs 4",
            d.n_rows(),
            d.n_cols()
        )));
    }
    let block_cfg = ArsvdConfig { d_max, seed, ..*cfg };
    let profiles = stability_sweep(&d, cfg.t_max, d_max, sel.projections, seed, sel.vectors)?;
    let (width, _) = block_cfg.working_width(d.n_rows(), d.n_cols());
    let omega = gaussian_matrix(d.n_rows(), width, seed.substream(OMEGA_TAG));
    let mut sweep = PowerSweep::new(&d, &omega)?;
    let mut out = Vec::with_capacity(cfg.t_max);
    for profile in &profiles {
        sweep.advance()?;
        let cp = changepoint_of(&profile.scores)?;
        let mut f = sweep.ritz()?;
        f.truncate(cp.d_hat.min(width));
        let (error, collapsed) = schur_error(&a, &b, &cm, &f, sel.pinv_rtol)?;
        out.push(BlockOutcome {
            error,
            rank: cp.d_hat,
            collapsed,
            weak_change_point: cp.weak,
            held_out_norm: a.frobenius_norm_sq(),
        });
    }
    Ok(out)
}

/// BiCV traces for every `t = 1 … t_max` on one shared split.
pub fn bicv_sweep(x: &DenseMatrix, cfg: &ArsvdConfig, sel: &SelectConfig, split_seed: RngSeed) -> Result<Vec<BicvTrace>> {
    cfg.validate()?;
    let split = BicvSplit::random(x.n_rows(), x.n_cols(), split_seed)?;
    let quadrants = [(0usize, 0usize), (0, 1), (1, 0), (1, 1)];
    let per_block: Vec<Vec<BlockOutcome>> = quadrants
        .par_iter()
        .enumerate()
        .map(|(i, &q)| quadrant_sweep(x, &split, q, cfg, sel, split_seed.substream(BLOCK_TAG + i as u64)))
        .collect::<Result<_>>()?;
    Ok((0..cfg.t_max)
        .map(|ti| {
            let blocks: Vec<BlockOutcome> = per_block.iter().map(|b| b[ti]).collect();
            BicvTrace {
                t: ti + 1,
                median_error: median_f64(blocks.iter().map(|b| b.error).collect()),
                median_rank: median_count(blocks.iter().map(|b| b.rank).collect()),
                blocks,
            }
        })
        .collect())
}

/// Median BiCV error and median rank at a single `t`.
pub fn bicv_error(x: &DenseMatrix, t: usize, cfg: &ArsvdConfig, sel: &SelectConfig, split_seed: RngSeed) -> Result<(f64, usize)> {
    if t == 0 || t > cfg.t_max {
        return Err(Error::config(format!("iteration {t} outside 1..={}", cfg.t_max)));
    }
    let capped = ArsvdConfig { t_max: t, ..*cfg };
    let traces = bicv_sweep(x, &capped, sel, split_seed)?;
    let last = traces.last().expect("t >= 1");
    Ok((last.median_error, last.median_rank))
}

/// `t*` is the smallest `t` whose median error is within
/// `tie_rel · min + tie_rtol · ‖X‖²_F` of the minimum; `d*` is the median rank at `t*`.
pub fn select_t_and_d(x: &DenseMatrix, cfg: &ArsvdConfig, sel: &SelectConfig) -> Result<BicvReport> {
    let traces = bicv_sweep(x, cfg, sel, cfg.seed.substream(SPLIT_TAG))?;
    let (t_star, d_star) = argmin_trace(&traces, sel.tie_rel, sel.tie_rtol * x.frobenius_norm_sq());
    let null_error = median_f64(traces[0].blocks.iter().map(|b| b.held_out_norm).collect());
    let no_signal = traces[t_star - 1].median_error >= null_error;
    Ok(BicvReport { traces, t_star, d_star, null_error, no_signal })
}

pub(crate) fn argmin_trace(traces: &[BicvTrace], rel: f64, abs: f64) -> (usize, usize) {
    let best = traces.iter().map(|tr| tr.median_error).fold(f64::INFINITY, f64::min);
    let pick = traces.iter().find(|tr| tr.median_error <= best * (1.0 + rel) + abs).expect("non-empty traces");
    (pick.t, pick.median_rank)
}
