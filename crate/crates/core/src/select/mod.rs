//! Data-driven choice of the rank `d*` and the number of power iterations `t*`.
//!
//! The rank at a given `t` comes from the stability of singular-vector
//! estimates across independent projections ([`stability`]); `t` is chosen by
//! bi-cross-validation ([`bicv`]).

pub mod bicv;
pub mod stability;
pub mod stats;

use serde::{Deserialize, Serialize};

use crate::arsvd::ArsvdConfig;
use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;

pub use bicv::{bicv_error, bicv_sweep, schur_error, select_t_and_d, BicvReport, BicvSplit, BicvTrace, BlockOutcome};
pub use stability::{
    changepoint_of, rank_changepoint, stability_from_projections, stability_scores, stability_sweep, ChangePoint,
    StabilityProfile, StabilityVectors, WEAK_CHANGE_POINT_P,
};
pub use stats::{average_ranks, spearman_abs, wilcoxon_ranksum_p, Spearman};

/// Where the final rank comes from once `t*` is known.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RankSource {
    /// Median of the four held-out-block change points at `t*`.
    BicvMedian,
    /// Change point of the full-data stability profile at `t*`.
    FullData,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectConfig {
    /// Independent projections per stability profile.
    pub projections: usize,
    /// Relative cutoff for the pseudoinverse of the training block.
    pub pinv_rtol: f64,
    /// BiCV errors within `tie_rel` of the minimum, relative to it, count as ties.
    pub tie_rel: f64,
    /// Absolute tie floor as a fraction of `‖X‖²_F`.
    pub tie_rtol: f64,
    pub rank_source: RankSource,
    pub vectors: StabilityVectors,
    /// Report `d* = 0` when the best BiCV error does not beat predicting zero.
    pub null_check: bool,
}

impl Default for SelectConfig {
    fn default() -> Self {
        Self {
            projections: 5,
            pinv_rtol: 1e-10,
            tie_rel: 1e-3,
            tie_rtol: 1e-12,
            rank_source: RankSource::BicvMedian,
            vectors: StabilityVectors::PowerBlock,
            null_check: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub t_star: usize,
    pub d_star: usize,
    /// Working width `ℓ` of the factorization.
    pub width: usize,
    /// `d_max + Δ` exceeded `min(n, p)`.
    pub clamped: bool,
    /// Effective `d_max` after clamping to `min(n, p)`.
    pub d_max: usize,
    /// Full-data stability profiles, `t = 1 … t_max`.
    pub stability: Vec<StabilityProfile>,
    pub change_points: Vec<ChangePoint>,
    pub bicv: Option<BicvReport>,
    /// The input matrix was identically zero.
    pub degenerate_zero: bool,
    /// No sharp change point at `t*`, or held-out prediction no better than
    /// zero. The data look like noise.
    pub degenerate: bool,
}

impl SelectionReport {
    /// Full-data change point at `t*`.
    pub fn change_point_at_star(&self) -> Option<&ChangePoint> {
        self.change_points.get(self.t_star.checked_sub(1)?)
    }
}

/// Runs the full selection on `x`.
pub fn select(x: &DenseMatrix, cfg: &ArsvdConfig, sel: &SelectConfig) -> Result<SelectionReport> {
    cfg.validate()?;
    let (n, p) = x.shape();
    let (width, clamped) = cfg.working_width(n, p);
    let d_max = cfg.d_max.min(n.min(p));
    if x.max_abs() == 0.0 {
        return Ok(SelectionReport {
            t_star: 0,
            d_star: 0,
            width,
            clamped,
            d_max,
            stability: vec![],
            change_points: vec![],
            bicv: None,
            degenerate_zero: true,
            degenerate: true,
        });
    }
    if d_max < 4 {
        return Err(Error::config(format!("d_max = {d_max} after clamping; rank selection needs at least 4")));
    }
    let stability = stability_sweep(x, cfg.t_max, d_max, sel.projections, cfg.seed, sel.vectors)?;
    let change_points = stability.iter().map(rank_changepoint).collect::<Result<Vec<_>>>()?;
    let bicv = select_t_and_d(x, cfg, sel)?;
    let t_star = bicv.t_star;
    let cp = &change_points[t_star - 1];
    let no_signal = sel.null_check && bicv.no_signal;
    let d_star = match sel.rank_source {
        _ if no_signal => 0,
        RankSource::BicvMedian => bicv.d_star,
        RankSource::FullData => cp.d_hat,
    }
    .min(width);
    let degenerate = cp.weak || cp.degenerate || no_signal;
    Ok(SelectionReport {
        t_star,
        d_star,
        width,
        clamped,
        d_max,
        stability,
        change_points,
        bicv: Some(bicv),
        degenerate_zero: false,
        degenerate,
    })
}
