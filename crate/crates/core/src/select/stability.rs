//! Projection stability of singular-vector estimates and the change point that
//! separates stable (signal) from unstable (noise) directions.

use serde::{Deserialize, Serialize};

use crate::arsvd::PowerSweep;
use crate::error::{Error, Result};
use crate::linalg::svd_exact;
use crate::matrix::{matmul, matmul_tn, DenseMatrix};
use crate::rng::{gaussian_matrix, RngSeed};

use super::stats::{spearman_abs, wilcoxon_ranksum_p};

/// Stream tag offset of the stability projections.
pub(crate) const STABILITY_TAG: u64 = 100;

/// Scores below this p-value mark a sharp change point.
pub const WEAK_CHANGE_POINT_P: f64 = 0.05;

/// Which left singular-vector estimates a projection contributes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum StabilityVectors {
    /// Left singular vectors of the power block `(XXᵀ)^t Ω` itself.
    #[default]
    PowerBlock,
    /// Rayleigh–Ritz vectors of `X` on the span of the power block.
    Ritz,
}

/// One projection's running estimate.
enum Tracker<'a> {
    Block { x: &'a DenseMatrix, f: DenseMatrix },
    Ritz(PowerSweep<'a>),
}

impl<'a> Tracker<'a> {
    fn new(x: &'a DenseMatrix, omega: &DenseMatrix, kind: StabilityVectors) -> Result<Self> {
        Ok(match kind {
            StabilityVectors::PowerBlock => Self::Block { x, f: omega.clone() },
            StabilityVectors::Ritz => Self::Ritz(PowerSweep::new(x, omega)?),
        })
    }

    /// Advances one power of `XXᵀ` and returns the `n × d_max` vector estimates.
    fn step(&mut self) -> Result<DenseMatrix> {
        match self {
            Self::Block { x, f } => {
                let mut next = matmul(x, &matmul_tn(x, f)?)?;
                let m = next.max_abs();
                if m > 0.0 {
                    // a positive scalar leaves the singular vectors unchanged
                    next.scale(1.0 / m);
                }
                *f = next;
                Ok(svd_exact(f)?.u)
            }
            Self::Ritz(sweep) => {
                sweep.advance()?;
                Ok(sweep.ritz()?.u)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityProfile {
    pub t: usize,
    /// Mean pairwise `|Spearman|` per direction `k = 1 … d_max`.
    pub scores: Vec<f64>,
    pub b: usize,
    /// Pairs in which a singular-vector estimate had constant ranks.
    pub degenerate_pairs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChangePoint {
    /// First noise direction (1-based).
    pub k_hat: usize,
    /// Number of signal directions, `k_hat − 1`.
    pub d_hat: usize,
    /// `(k, p-value)` for `k = 2 … d_max − 1`.
    pub p_values: Vec<(usize, f64)>,
    pub min_p: f64,
    /// Minimal p-value above [`WEAK_CHANGE_POINT_P`].
    pub weak: bool,
    /// All scores identical.
    pub degenerate: bool,
}

/// Stability profile at a single `t` from `b` fresh projections.
pub fn stability_scores(
    x: &DenseMatrix,
    t: usize,
    d_max: usize,
    b: usize,
    seed: RngSeed,
    kind: StabilityVectors,
) -> Result<StabilityProfile> {
    if t == 0 {
        return Err(Error::config("stability needs t >= 1"));
    }
    let mut all = stability_sweep(x, t, d_max, b, seed, kind)?;
    Ok(all.pop().expect("t >= 1 profiles"))
}

/// Stability profiles for `t = 1 … t_max`, sharing one power sweep per projection.
pub fn stability_sweep(
    x: &DenseMatrix,
    t_max: usize,
    d_max: usize,
    b: usize,
    seed: RngSeed,
    kind: StabilityVectors,
) -> Result<Vec<StabilityProfile>> {
    if b < 2 {
        return Err(Error::config("stability needs at least two projections"));
    }
    if d_max == 0 || d_max > x.n_rows().min(x.n_cols()) {
        return Err(Error::config(format!(
            "stability d_max {d_max} outside 1..={}",
            x.n_rows().min(x.n_cols())
        )));
    }
    let omegas: Vec<DenseMatrix> =
        (0..b).map(|j| gaussian_matrix(x.n_rows(), d_max, seed.substream(STABILITY_TAG + j as u64))).collect();
    stability_from_projections(x, t_max, &omegas, kind)
}

/// Stability profiles for caller-supplied projections (each `n × d_max`).
pub fn stability_from_projections(
    x: &DenseMatrix,
    t_max: usize,
    omegas: &[DenseMatrix],
    kind: StabilityVectors,
) -> Result<Vec<StabilityProfile>> {
    let b = omegas.len();
    if b < 2 {
        return Err(Error::config("stability needs at least two projections"));
    }
    if x.n_rows() < 3 {
        return Err(Error::input("stability needs at least 3 rows"));
    }
    let d_max = omegas[0].n_cols();
    if omegas.iter().any(|o| o.shape() != (x.n_rows(), d_max)) {
        return Err(Error::input("stability projections must share one n x d_max shape"));
    }
    let mut trackers = omegas.iter().map(|o| Tracker::new(x, o, kind)).collect::<Result<Vec<_>>>()?;
    let mut profiles = Vec::with_capacity(t_max);
    for t in 1..=t_max {
        let mut vectors: Vec<DenseMatrix> = Vec::with_capacity(b);
        for tr in trackers.iter_mut() {
            vectors.push(tr.step()?);
        }
        let mut scores = vec![0.0; d_max];
        let mut degenerate_pairs = 0;
        let pairs = (b * (b - 1) / 2) as f64;
        for (k, score) in scores.iter_mut().enumerate() {
            let cols: Vec<Vec<f64>> = vectors.iter().map(|u| u.col(k)).collect();
            let mut acc = 0.0;
            for j1 in 0..b {
                for j2 in j1 + 1..b {
                    let s = spearman_abs(&cols[j1], &cols[j2])?;
                    degenerate_pairs += usize::from(s.degenerate);
                    acc += s.value;
                }
            }
            *score = (acc / pairs).clamp(0.0, 1.0);
        }
        profiles.push(StabilityProfile { t, scores, b, degenerate_pairs });
    }
    Ok(profiles)
}

/// Wilcoxon change point over the stability scores.
///
/// For each `k ∈ {2, …, d_max − 1}` the scores `1 … k−1` are tested against
/// `k … d_max`; the smallest p-value wins, ties going to the smaller `k`.
pub fn rank_changepoint(profile: &StabilityProfile) -> Result<ChangePoint> {
    changepoint_of(&profile.scores)
}

pub fn changepoint_of(scores: &[f64]) -> Result<ChangePoint> {
    let d_max = scores.len();
    if d_max < 4 {
        return Err(Error::config(format!(
            "change point needs at least 4 stability scores (got {d_max}); raise d_max"
        )));
    }
    let degenerate = scores.iter().all(|&s| s == scores[0]);
    let mut p_values = Vec::with_capacity(d_max - 2);
    let mut best = (2usize, f64::INFINITY);
    for k in 2..d_max {
        let p = wilcoxon_ranksum_p(&scores[..k - 1], &scores[k - 1..])?;
        p_values.push((k, p));
        if p < best.1 {
            best = (k, p);
        }
    }
    let (k_hat, min_p) = best;
    Ok(ChangePoint { k_hat, d_hat: k_hat - 1, p_values, min_p, weak: min_p > WEAK_CHANGE_POINT_P, degenerate })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::matmul_nt;

    #[test]
    fn sharp_split_is_found() {
        let cp = changepoint_of(&[0.99, 0.98, 0.97, 0.96, 0.1, 0.12, 0.09, 0.11]).unwrap();
        assert_eq!(cp.k_hat, 5, "{:?}", cp.p_values);
        assert_eq!(cp.d_hat, 4);
        assert!((cp.min_p - 2.0 / 70.0).abs() < 1e-15);
        assert!(!cp.weak);
        // every other split has a larger p-value
        for &(k, p) in &cp.p_values {
            if k != 5 {
                assert!(p > cp.min_p, "k = {k}");
            }
        }
    }

    #[test]
    fn tied_noise_scores_split_after_three() {
        let cp = changepoint_of(&[0.99, 0.98, 0.97, 0.1, 0.12, 0.09, 0.11, 0.1]).unwrap();
        assert_eq!((cp.k_hat, cp.d_hat), (4, 3), "{:?}", cp.p_values);
        assert!((cp.min_p - 2.0 / 56.0).abs() < 1e-15);
    }

    #[test]
    fn linear_scores_give_weak_change_point() {
        let scores: Vec<f64> = (0..6).map(|i| 1.0 - 0.1 * i as f64).collect();
        let cp = changepoint_of(&scores).unwrap();
        assert!(cp.weak);
    }

    #[test]
    fn constant_scores_are_degenerate() {
        let cp = changepoint_of(&[0.5; 7]).unwrap();
        assert!(cp.degenerate);
        assert_eq!(cp.d_hat, 1);
        assert!(cp.p_values.iter().all(|&(_, p)| p == 1.0));
    }

    #[test]
    fn too_few_scores_is_an_error() {
        let err = changepoint_of(&[0.9, 0.8, 0.1]).unwrap_err();
        assert!(err.to_string().contains("raise d_max"));
    }

    #[test]
    fn identical_projections_score_one() {
        let x = gaussian_matrix(30, 20, RngSeed::new(4));
        let omega = gaussian_matrix(30, 5, RngSeed::new(5));
        let profiles = stability_from_projections(&x, 2, &[omega.clone(), omega], StabilityVectors::Ritz).unwrap();
        for p in profiles {
            assert!(p.scores.iter().all(|&s| (s - 1.0).abs() < 1e-12), "{:?}", p.scores);
        }
    }

    #[test]
    fn two_projections_give_single_correlation() {
        let x = gaussian_matrix(25, 15, RngSeed::new(6));
        let seed = RngSeed::new(7);
        let prof = stability_scores(&x, 1, 4, 2, seed, StabilityVectors::Ritz).unwrap();
        let o1 = gaussian_matrix(25, 4, seed.substream(STABILITY_TAG));
        let o2 = gaussian_matrix(25, 4, seed.substream(STABILITY_TAG + 1));
        let mut s1 = PowerSweep::new(&x, &o1).unwrap();
        let mut s2 = PowerSweep::new(&x, &o2).unwrap();
        s1.advance().unwrap();
        s2.advance().unwrap();
        let (u1, u2) = (s1.ritz().unwrap().u, s2.ritz().unwrap().u);
        for k in 0..4 {
            let want = spearman_abs(&u1.col(k), &u2.col(k)).unwrap().value;
            assert!((prof.scores[k] - want).abs() < 1e-15);
        }
    }

    #[test]
    fn noiseless_low_rank_is_stable_in_signal_directions() {
        let u = gaussian_matrix(80, 3, RngSeed::new(8));
        let v = gaussian_matrix(60, 3, RngSeed::new(9));
        let x = matmul_nt(&u, &v).unwrap();
        let prof = stability_scores(&x, 2, 8, 5, RngSeed::new(10), StabilityVectors::Ritz).unwrap();
        assert!(prof.scores[..3].iter().all(|&s| s >= 0.95), "{:?}", prof.scores);
        assert!(prof.scores.iter().all(|&s| (0.0..=1.0).contains(&s)));
    }
}
