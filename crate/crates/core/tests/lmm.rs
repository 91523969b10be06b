mod common;

use arsvd_core::arsvd::RankChoice;
use arsvd_core::dist::{chisq1_sf, ks_uniform_pvalue};
use arsvd_core::lmm::{
    assoc_scan, assoc_scan_standardized, fit_null, grm_factor, naive_scan, run_assoc, AssocOptions, FitMethod,
    GenotypeMatrix, GrmFactor, VarianceModel,
};
use arsvd_core::matrix::{matmul_nt, DenseMatrix};
use arsvd_core::simgen::{sim_admixture, uniform_stiefel, AdmixSimConfig};
use arsvd_core::{gaussian_matrix, sym_eigen, ArsvdConfig, RngSeed};
use common::to_na;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

fn intercept(n: usize) -> DenseMatrix {
    DenseMatrix::from_fn(n, 1, |_, _| 1.0)
}

fn random_genotypes(n: usize, p: usize, seed: u64) -> GenotypeMatrix {
    let mut rng = RngSeed::new(seed).rng();
    GenotypeMatrix::unnamed(DenseMatrix::from_fn(n, p, |_, _| f64::from(rng.random_range(0u8..3)))).unwrap()
}

fn factor(u: DenseMatrix, lambda: Vec<f64>) -> GrmFactor {
    GrmFactor { u, lambda, p_used: 1, iterations: 0, selection: None }
}

#[test]
fn standardized_columns_have_zero_mean_and_unit_variance() {
    let g = random_genotypes(100, 50, 4);
    let z = g.standardize().unwrap();
    for j in 0..z.matrix.n_cols() {
        let c = z.matrix.col(j);
        let mean = c.iter().sum::<f64>() / 100.0;
        let var = c.iter().map(|v| v * v).sum::<f64>() / 100.0;
        assert!(mean.abs() <= 1e-12 && (var - 1.0).abs() <= 1e-8);
    }
}

#[test]
fn genotype_entries_are_validated() {
    let raw = DenseMatrix::from_rows(&[[0.0, 1.0], [2.0, 3.0]]).unwrap();
    let err = GenotypeMatrix::unnamed(raw).unwrap_err().to_string();
    assert!(err.contains("v2") && err.contains("expected 0, 1 or 2"), "{err}");
}

#[test]
fn paired_individuals_share_relationship_eigenvectors() {
    // rows 1,2 identical and rows 3,4 identical, the two pairs independent
    let a = [0.0, 1.0, 2.0, 2.0, 0.0, 1.0, 1.0, 2.0];
    let b = [2.0, 0.0, 1.0, 0.0, 1.0, 2.0, 0.0, 1.0];
    let raw = DenseMatrix::from_rows(&[a, a, b, b]).unwrap();
    let g = GenotypeMatrix::unnamed(raw).unwrap();
    let z = g.standardize().unwrap();
    let k = grm_factor(&z, &[], &ArsvdConfig::new(2, 3, 1), &RankChoice::Fixed { d: 2, t: 3 }).unwrap();
    // dense oracle K = G̃G̃ᵀ / p
    let mut dense = matmul_nt(&z.matrix, &z.matrix).unwrap();
    dense.scale(1.0 / z.matrix.n_cols() as f64);
    assert!(k.dense().sub(&dense).unwrap().max_abs() <= 1e-10);
    // after centering the pair profiles are negatives of each other, so the
    // signal is one eigenvector, constant within each pair
    let eig = sym_eigen(&dense, true).unwrap();
    assert!(eig.values[1].abs() <= 1e-10 * eig.values[0]);
    assert!((k.lambda[0] - eig.values[0]).abs() <= 1e-10 * eig.values[0]);
    let top = k.u.col(0);
    assert!((top[0] - top[1]).abs() <= 1e-10 && (top[2] - top[3]).abs() <= 1e-10);
    assert!((top[0] + top[2]).abs() <= 1e-10 && (top[0].abs() - 0.5).abs() <= 1e-10);
}

#[test]
fn excluding_a_group_equals_deleting_its_columns() {
    let g = random_genotypes(40, 30, 7);
    let group: Vec<usize> = vec![0, 3, 4, 17, 29];
    let keep: Vec<usize> = (0..30).filter(|j| !group.contains(j)).collect();
    let cfg = ArsvdConfig::new(5, 4, 11);
    let choice = RankChoice::Fixed { d: 5, t: 4 };
    let full = grm_factor(&g.standardize().unwrap(), &group, &cfg, &choice).unwrap();
    let cut = GenotypeMatrix::unnamed(g.raw().select_cols(&keep)).unwrap();
    let other = grm_factor(&cut.standardize().unwrap(), &[], &cfg, &choice).unwrap();
    assert_eq!(full.u, other.u);
    assert_eq!(full.lambda, other.lambda);
    assert_eq!(full.p_used, 25);
}

/// Profile ML log-likelihood for dense `V = σ_g² K + σ_e² I` with σ_g² profiled out.
fn dense_profile(y: &[f64], c: &DenseMatrix, k: &DenseMatrix, delta: f64) -> (f64, f64) {
    let n = y.len();
    let mut h = to_na(k);
    for i in 0..n {
        h[(i, i)] += delta;
    }
    let chol = h.clone().cholesky().unwrap();
    let cn = to_na(c);
    let yv = nalgebra::DVector::from_column_slice(y);
    let hic = chol.solve(&cn);
    let hiy = chol.solve(&yv);
    let beta = (cn.transpose() * &hic).cholesky().unwrap().solve(&(cn.transpose() * &hiy));
    let r = &yv - &cn * beta;
    let q = r.dot(&chol.solve(&r));
    let sg = q / n as f64;
    let logdet: f64 = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let ll = -0.5 * (n as f64 * (2.0 * std::f64::consts::PI * sg).ln() + logdet + n as f64);
    (ll, sg)
}

#[test]
fn variance_components_agree_with_dense_grid_search() {
    let n = 200;
    let u = uniform_stiefel(n, 3, RngSeed::new(2)).unwrap();
    let grm = factor(u.clone(), vec![4.0, 0.3, 0.1]);
    let e = gaussian_matrix(n, 1, RngSeed::new(3));
    let y: Vec<f64> = (0..n).map(|i| 3.0 * u[(i, 0)] + 0.1f64.sqrt() * e[(i, 0)]).collect();
    let c = intercept(n);
    let vc = fit_null(&y, &c, &grm, FitMethod::Ml).unwrap();
    let k = grm.dense();
    let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
    for i in 0..=400 {
        let delta = 10f64.powf(-5.0 + 10.0 * i as f64 / 400.0);
        let (ll, sg) = dense_profile(&y, &c, &k, delta);
        if ll > best.0 {
            best = (ll, sg, delta);
        }
    }
    assert!(common::rel_diff(vc.sigma_g2, best.1) <= 0.3, "{} vs {}", vc.sigma_g2, best.1);
    assert!(vc.log_likelihood >= best.0 - 1e-6);
    let (ll_here, _) = dense_profile(&y, &c, &k, vc.delta);
    assert!((ll_here - vc.log_likelihood).abs() <= 1e-8 * ll_here.abs());
}

#[test]
fn equal_spectrum_over_the_whole_space_is_flagged() {
    let n = 30;
    let u = uniform_stiefel(n, n, RngSeed::new(5)).unwrap();
    let grm = factor(u, vec![0.7; n]);
    let y = gaussian_matrix(n, 1, RngSeed::new(6)).col(0);
    let vc = fit_null(&y, &intercept(n), &grm, FitMethod::Ml).unwrap();
    assert!(vc.flat && vc.boundary, "{vc:?}");
    assert_eq!(vc.sigma_g2 * vc.delta, vc.sigma_e2);
}

#[test]
fn noise_phenotype_has_low_heritability() {
    for seed in 0..10 {
        let sim = sim_admixture(&AdmixSimConfig::new(300, 1000, 3, 1.0, seed)).unwrap();
        let z = sim.genotypes.standardize().unwrap();
        let grm = grm_factor(&z, &[], &ArsvdConfig::new(10, 5, seed), &RankChoice::default()).unwrap();
        let y = gaussian_matrix(300, 1, RngSeed::new(900 + seed)).col(0);
        let vc = fit_null(&y, &intercept(300), &grm, FitMethod::Ml).unwrap();
        let h2 = vc.sigma_g2 / (vc.sigma_g2 + vc.sigma_e2);
        assert!(h2 <= 0.1, "seed {seed}: h2 = {h2}");
    }
}

#[test]
fn rotated_inverse_matches_dense_inverse() {
    let n = 300;
    let u = uniform_stiefel(n, 8, RngSeed::new(1)).unwrap();
    let grm = factor(u, (0..8).map(|k| 5.0 / (1.0 + k as f64)).collect());
    let model = VarianceModel::new(&grm, 0.8, 0.3).unwrap();
    let mut v = to_na(&grm.dense()) * 0.8;
    for i in 0..n {
        v[(i, i)] += 0.3;
    }
    let w = gaussian_matrix(n, 1, RngSeed::new(2)).col(0);
    let ours = model.apply_inverse(&w).unwrap();
    let theirs = v.cholesky().unwrap().solve(&nalgebra::DVector::from_column_slice(&w));
    let diff: f64 = ours.iter().zip(theirs.iter()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    assert!(diff <= 1e-8);
}

#[test]
fn zero_genetic_variance_is_ordinary_least_squares() {
    let n = 80;
    let g = random_genotypes(n, 12, 9);
    let y = gaussian_matrix(n, 1, RngSeed::new(10)).col(0);
    let mut c = DenseMatrix::from_fn(n, 2, |i, j| if j == 0 { 1.0 } else { (i as f64 * 0.1).sin() });
    c[(0, 1)] += 0.5;
    let grm = GrmFactor::none(n);
    let model = VarianceModel::new(&grm, 0.0, 1.7).unwrap();
    let lmm = assoc_scan(&g, &y, &c, &model, None).unwrap();
    let ols = naive_scan(&g, &y, &c).unwrap();
    for (a, b) in lmm.iter().zip(&ols) {
        assert!((a.beta - b.beta).abs() <= 1e-10 && (a.se - b.se).abs() <= 1e-10);
        assert!((a.p_value - b.p_value).abs() <= 1e-10);
    }
    // the same through a non-trivial factor with σ_g² = 0
    let u = uniform_stiefel(n, 4, RngSeed::new(11)).unwrap();
    let grm = factor(u, vec![3.0, 2.0, 1.0, 0.5]);
    let model = VarianceModel::new(&grm, 0.0, 1.0).unwrap();
    for (a, b) in assoc_scan(&g, &y, &c, &model, None).unwrap().iter().zip(&ols) {
        assert!((a.stat - b.stat).abs() <= 1e-10 * b.stat.max(1.0));
    }
}

#[test]
fn planted_variant_without_structure_is_found_by_ols() {
    let n = 300;
    let g = random_genotypes(n, 200, 21);
    let z = g.standardize().unwrap();
    let e = gaussian_matrix(n, 1, RngSeed::new(22));
    let y: Vec<f64> = (0..n).map(|i| 0.5 * z.matrix[(i, 57)] + e[(i, 0)]).collect();
    let recs = naive_scan(&g, &y, &intercept(n)).unwrap();
    let best = (0..recs.len()).min_by(|&a, &b| recs[a].p_value.total_cmp(&recs[b].p_value)).unwrap();
    assert_eq!(best, 57);
}

#[test]
fn permuted_phenotype_gives_uniform_p_values() {
    let mut passes = 0;
    for seed in 0..10 {
        let sim = sim_admixture(&AdmixSimConfig::new(300, 800, 3, 1.0, 40 + seed)).unwrap();
        let mut y = sim.phenotype.clone();
        y.shuffle(&mut RngSeed::new(seed).substream(7).rng());
        let opts = AssocOptions { arsvd: ArsvdConfig::new(10, 5, seed), rank: RankChoice::Fixed { d: 10, t: 5 }, ..Default::default() };
        let run = run_assoc(&sim.genotypes, &y, &intercept(300), &opts).unwrap();
        let ps: Vec<f64> = run.records.iter().filter(|r| r.flag.is_none()).map(|r| r.p_value).collect();
        assert!(ps.iter().all(|&p| p > 0.0 && p <= 1.0));
        passes += usize::from(ks_uniform_pvalue(&ps) > 0.01);
    }
    assert!(passes >= 8, "{passes}/10");
}

#[test]
fn leave_group_out_scans_every_variant_once() {
    let g = random_genotypes(60, 20, 3);
    let y = gaussian_matrix(60, 1, RngSeed::new(4)).col(0);
    let groups = vec![vec![0, 1, 2, 3, 4], vec![10, 11, 12]];
    let opts = AssocOptions {
        arsvd: ArsvdConfig::new(4, 3, 1),
        rank: RankChoice::Fixed { d: 4, t: 3 },
        groups: Some(groups.clone()),
        ..Default::default()
    };
    let run = run_assoc(&g, &y, &intercept(60), &opts).unwrap();
    assert_eq!(run.records.len(), 20);
    assert_eq!(run.fits.len(), 3);
    assert_eq!(run.fits[0].p_used, 15);
    assert_eq!(run.fits[2].p_used, 20);
    for (j, r) in run.records.iter().enumerate() {
        assert_eq!(r.variant_id, format!("v{}", j + 1));
    }
    let bad = AssocOptions { groups: Some(vec![vec![1, 2], vec![2]]), ..opts.clone() };
    assert!(run_assoc(&g, &y, &intercept(60), &bad).is_err());
    let out_of_range = AssocOptions { groups: Some(vec![vec![25]]), ..opts };
    assert!(run_assoc(&g, &y, &intercept(60), &out_of_range).is_err());
}

#[test]
fn chi_square_tail_reference_values() {
    assert_eq!(chisq1_sf(0.0), 1.0);
    assert!((chisq1_sf(3.841459) - 0.05).abs() <= 1e-4);
    // erfc(√(x/2)) to 30 digits
    let refs = [
        (1.0, 0.317310507862914102829534908736),
        (4.0, 0.0455002638963584144005652743331),
        (9.0, 0.00269979606326018905330362953519),
        (25.0, 5.7330314375838782334750466575e-7),
    ];
    for (x, want) in refs {
        assert!((chisq1_sf(x) - want).abs() <= 1e-12, "x = {x}");
        assert!(common::rel_diff(chisq1_sf(x), want) <= 1e-13);
    }
}

#[test]
fn chi_square_tail_matches_quadrature() {
    // 2 ∫_z^∞ φ(t) dt by composite Simpson on [z, z + 12]
    let sf = |z: f64| {
        let m = 200_000;
        let h = 12.0 / m as f64;
        let phi = |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let mut s = phi(z) + phi(z + 12.0);
        for i in 1..m {
            s += phi(z + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        2.0 * s * h / 3.0
    };
    for x in [0.01, 0.5, 2.0, 3.841459, 10.0, 30.0] {
        assert!((chisq1_sf(x) - sf(x.sqrt())).abs() <= 1e-12, "x = {x}");
    }
}

#[test]
fn kolmogorov_one_percent_point() {
    assert!((arsvd_core::dist::kolmogorov_sf(1.6276) - 0.01).abs() <= 1e-4);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn wald_statistic_ignores_column_scale(c in 0.01f64..100.0, seed in any::<u64>()) {
        let n = 50;
        let g = random_genotypes(n, 6, seed);
        let Ok(z) = g.standardize() else { return Ok(()); };
        let y = gaussian_matrix(n, 1, RngSeed::new(seed ^ 3)).col(0);
        let u = uniform_stiefel(n, 3, RngSeed::new(seed ^ 5)).unwrap();
        let grm = factor(u, vec![2.0, 1.0, 0.5]);
        let model = VarianceModel::new(&grm, 0.6, 0.9).unwrap();
        let ids: Vec<String> = g.variant_ids().to_vec();
        let base = assoc_scan_standardized(&z, &ids, &y, &intercept(n), &model, None).unwrap();
        let mut scaled = z.clone();
        scaled.matrix.map_cols(|j, v| if j == 0 { c * v } else { v });
        let other = assoc_scan_standardized(&scaled, &ids, &y, &intercept(n), &model, None).unwrap();
        let j = z.kept[0];
        prop_assert!((other[j].stat - base[j].stat).abs() <= 1e-10 * base[j].stat.max(1.0));
        prop_assert!((other[j].beta * c - base[j].beta).abs() <= 1e-10 * base[j].beta.abs().max(1e-3));
        prop_assert!((other[j].se * c - base[j].se).abs() <= 1e-10 * base[j].se);
    }
}
