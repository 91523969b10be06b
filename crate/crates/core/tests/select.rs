mod common;

use arsvd_core::matrix::{matmul, matmul_nt, DenseMatrix};
use arsvd_core::select::{
    bicv_sweep, changepoint_of, schur_error, select, select_t_and_d, spearman_abs, stability_scores, wilcoxon_ranksum_p,
    BicvSplit, StabilityVectors,
};
use arsvd_core::simgen::uniform_stiefel;
use arsvd_core::{gaussian_matrix, svd_exact, ArsvdConfig, LowRankFactorization, RngSeed, SelectConfig};
use proptest::prelude::*;

fn planted(n: usize, p: usize, s: &[f64], seed: u64) -> DenseMatrix {
    let mut u = uniform_stiefel(n, s.len(), RngSeed::new(seed).substream(1)).unwrap();
    let v = uniform_stiefel(p, s.len(), RngSeed::new(seed).substream(2)).unwrap();
    u.scale_cols(s);
    matmul_nt(&u, &v).unwrap()
}

fn exact_factor(d: &DenseMatrix) -> LowRankFactorization {
    let f = svd_exact(d).unwrap();
    let rank = f.s.len();
    LowRankFactorization { u: f.u, s: f.s, v: f.v, rank, iterations: 0 }
}

/// `‖A − B D⁺ C‖²` with the pseudoinverse from an independent library.
fn dense_schur(a: &DenseMatrix, b: &DenseMatrix, c: &DenseMatrix, d: &DenseMatrix) -> f64 {
    let pinv = common::to_na(d).pseudo_inverse(1e-10 * common::na_singular_values(d)[0]).unwrap();
    let pred = common::to_na(b) * pinv * common::to_na(c);
    (common::to_na(a) - pred).norm_squared()
}

#[test]
fn noiseless_rank_three_is_stable_on_top() {
    let x = planted(120, 90, &[10.0, 6.0, 3.0], 4);
    let prof = stability_scores(&x, 2, 8, 5, RngSeed::new(9), StabilityVectors::PowerBlock).unwrap();
    assert!(prof.scores[..3].iter().all(|&s| s >= 0.95), "{:?}", prof.scores);
    // null calibration: |Spearman| between independent Gaussian vectors of length n
    let null: Vec<f64> = (0..200)
        .map(|i| {
            let g = gaussian_matrix(120, 2, RngSeed::new(1000 + i));
            spearman_abs(&g.col(0), &g.col(1)).unwrap().value
        })
        .collect();
    let null_mean = null.iter().sum::<f64>() / null.len() as f64;
    let tail_mean = prof.scores[3..].iter().sum::<f64>() / 5.0;
    let null_sd = (null.iter().map(|v| (v - null_mean).powi(2)).sum::<f64>() / (null.len() - 1) as f64).sqrt();
    assert!(
        (tail_mean - null_mean).abs() <= 3.0 * null_sd / 5f64.sqrt(),
        "noise scores {:?}, null mean {null_mean}",
        &prof.scores[3..]
    );
    let cp = changepoint_of(&prof.scores).unwrap();
    assert_eq!(cp.d_hat, 3);
}

#[test]
fn rank_one_bicv_is_exact() {
    let u: Vec<f64> = (0..24).map(|i| 1.0 + 0.1 * i as f64).collect();
    let v: Vec<f64> = (0..20).map(|j| 0.5 + ((j * 7) % 5) as f64).collect();
    let x = matmul_nt(&DenseMatrix::column(&u), &DenseMatrix::column(&v)).unwrap();
    let cfg = ArsvdConfig::new(6, 3, 5).with_delta(2);
    for tr in bicv_sweep(&x, &cfg, &SelectConfig::default(), RngSeed::new(17)).unwrap() {
        for b in &tr.blocks {
            assert!(b.error <= 1e-16 * b.held_out_norm, "{b:?}");
        }
    }
}

#[test]
fn schur_error_matches_dense_pseudoinverse_on_8x8() {
    let x = gaussian_matrix(8, 8, RngSeed::new(2));
    let split = BicvSplit::random(8, 8, RngSeed::new(3)).unwrap();
    let a = x.submatrix(&split.rows[0], &split.cols[0]);
    let b = x.submatrix(&split.rows[0], &split.cols[1]);
    let c = x.submatrix(&split.rows[1], &split.cols[0]);
    let d = x.submatrix(&split.rows[1], &split.cols[1]);
    let (ours, collapsed) = schur_error(&a, &b, &c, &exact_factor(&d), 1e-10).unwrap();
    assert!(!collapsed);
    let want = dense_schur(&a, &b, &c, &d);
    assert!((ours - want).abs() <= 1e-10 * want.max(1.0), "{ours} vs {want}");
}

#[test]
fn collapsed_training_block_predicts_zero() {
    let a = DenseMatrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
    let z = DenseMatrix::zeros(2, 2);
    let f = LowRankFactorization::empty(2, 2);
    let (err, collapsed) = schur_error(&a, &z, &z, &f, 1e-10).unwrap();
    assert!(collapsed);
    assert_eq!(err, 30.0);
}

#[test]
fn noiseless_low_rank_ties_to_the_first_iteration() {
    let x = planted(80, 60, &[8.0, 5.0, 4.0, 2.0], 6);
    let rep = select_t_and_d(&x, &ArsvdConfig::new(12, 5, 1), &SelectConfig::default()).unwrap();
    assert_eq!(rep.t_star, 1, "{:?}", rep.traces.iter().map(|t| t.median_error).collect::<Vec<_>>());
    assert!(rep.traces.iter().all(|t| t.median_error <= 1e-20 * x.frobenius_norm_sq()));
    assert!(!rep.no_signal);
}

#[test]
fn pure_noise_is_flagged_with_small_rank() {
    for seed in 0..20 {
        let x = gaussian_matrix(100, 100, RngSeed::new(500 + seed));
        let rep = select(&x, &ArsvdConfig::new(12, 3, seed), &SelectConfig::default()).unwrap();
        assert!(rep.degenerate, "seed {seed}");
        assert!(rep.d_star <= 3, "seed {seed}: d* = {}", rep.d_star);
    }
}

#[test]
fn selection_needs_four_directions() {
    let x = gaussian_matrix(30, 30, RngSeed::new(1));
    assert!(select(&x, &ArsvdConfig::new(3, 2, 0), &SelectConfig::default()).is_err());
    assert!(stability_scores(&x, 1, 5, 1, RngSeed::new(0), StabilityVectors::PowerBlock).is_err());
}

fn score_vec() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1.0, 4..24)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ranksum_is_symmetric(a in prop::collection::vec(-5.0f64..5.0, 1..15), b in prop::collection::vec(-5.0f64..5.0, 1..15)) {
        let p1 = wilcoxon_ranksum_p(&a, &b).unwrap();
        let p2 = wilcoxon_ranksum_p(&b, &a).unwrap();
        prop_assert!((p1 - p2).abs() <= 1e-12);
        prop_assert!(p1 > 0.0 && p1 <= 1.0);
    }

    #[test]
    fn spearman_ignores_monotone_maps(u in prop::collection::vec(-3.0f64..3.0, 3..30), seed in any::<u64>()) {
        let w: Vec<f64> = gaussian_matrix(u.len(), 1, RngSeed::new(seed)).col(0);
        let base = spearman_abs(&u, &w).unwrap().value;
        let mapped: Vec<f64> = u.iter().map(|x| x.exp() * 3.0 - 1.0).collect();
        let cubed: Vec<f64> = w.iter().map(|x| x * x * x).collect();
        prop_assert!((spearman_abs(&mapped, &cubed).unwrap().value - base).abs() <= 1e-12);
        let flipped: Vec<f64> = w.iter().map(|x| -x).collect();
        prop_assert!((spearman_abs(&u, &flipped).unwrap().value - base).abs() <= 1e-12);
    }

    #[test]
    fn change_point_leaves_two_noise_slots(scores in score_vec()) {
        let cp = changepoint_of(&scores).unwrap();
        prop_assert!(cp.d_hat >= 1 && cp.d_hat <= scores.len() - 2);
        let min = cp.p_values.iter().map(|&(_, p)| p).fold(f64::INFINITY, f64::min);
        prop_assert_eq!(min, cp.min_p);
        let first = cp.p_values.iter().find(|&&(_, p)| p == min).unwrap().0;
        prop_assert_eq!(first, cp.k_hat);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn stability_scores_are_probabilities(n in 10usize..40, p in 6usize..30, t in 1usize..4, seed in any::<u64>(), ritz in any::<bool>()) {
        let x = gaussian_matrix(n, p, RngSeed::new(seed));
        let kind = if ritz { StabilityVectors::Ritz } else { StabilityVectors::PowerBlock };
        let d_max = p.min(n).min(6);
        let prof = stability_scores(&x, t, d_max, 3, RngSeed::new(seed ^ 1), kind).unwrap();
        prop_assert!(prof.scores.iter().all(|s| (0.0..=1.0).contains(s)));
    }

    #[test]
    fn exact_schur_matches_dense_on_small_blocks(n in 4usize..=12, p in 4usize..=12, rank in 1usize..4, seed in any::<u64>()) {
        let g = gaussian_matrix(n, rank, RngSeed::new(seed));
        let h = gaussian_matrix(rank, p, RngSeed::new(seed ^ 7));
        let noise = gaussian_matrix(n, p, RngSeed::new(seed ^ 9)).scaled(0.3);
        let x = matmul(&g, &h).unwrap().add(&noise).unwrap();
        let split = BicvSplit::random(n, p, RngSeed::new(seed ^ 3)).unwrap();
        let a = x.submatrix(&split.rows[1], &split.cols[1]);
        let b = x.submatrix(&split.rows[1], &split.cols[0]);
        let c = x.submatrix(&split.rows[0], &split.cols[1]);
        let d = x.submatrix(&split.rows[0], &split.cols[0]);
        let (ours, _) = schur_error(&a, &b, &c, &exact_factor(&d), 1e-10).unwrap();
        let want = dense_schur(&a, &b, &c, &d);
        prop_assert!((ours - want).abs() <= 1e-10 * want.max(1.0) * 1e2, "{} vs {}", ours, want);
    }
}
