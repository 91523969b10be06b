//! Simulators: low-rank signal plus Gaussian noise, and admixed genotypes
//! with a phenotype that depends on ancestry only.

use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{qr_thin, sym_eigen};
use crate::lmm::GenotypeMatrix;
use crate::matrix::{axpy, dot, matmul, matmul_nt, matvec, matvec_t, norm2, DenseMatrix};
use crate::rng::{gaussian_matrix, RngSeed};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LowRankSimConfig {
    pub n: usize,
    pub p: usize,
    /// True rank of the signal.
    pub d_star: usize,
    /// Signal-to-noise: the smallest signal value is `κ` times the top noise value.
    pub kappa: f64,
    pub seed: RngSeed,
}

impl LowRankSimConfig {
    pub fn new(n: usize, p: usize, d_star: usize, kappa: f64, seed: impl Into<RngSeed>) -> Self {
        Self { n, p, d_star, kappa, seed: seed.into() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.p == 0 {
            return Err(Error::config("simulation needs n, p >= 1"));
        }
        if self.d_star == 0 || self.d_star > self.n.min(self.p) {
            return Err(Error::config(format!("true rank {} outside 1..={}", self.d_star, self.n.min(self.p))));
        }
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return Err(Error::config("kappa must be positive"));
        }
        Ok(())
    }
}

/// Ground truth of a low-rank simulation.
#[derive(Debug, Clone)]
pub struct LowRankTruth {
    pub u: DenseMatrix,
    /// Signal singular values, non-increasing.
    pub s: Vec<f64>,
    pub v: DenseMatrix,
    /// Top singular value of the noise matrix that was added.
    pub s1_noise: f64,
}

/// `n × k` matrix with orthonormal columns, uniform over the Stiefel manifold.
pub fn uniform_stiefel(n: usize, k: usize, seed: RngSeed) -> Result<DenseMatrix> {
    Ok(qr_thin(&gaussian_matrix(n, k, seed))?.q)
}

/// `X = U S Vᵀ + E` with `E_ij ~ N(0, 1/n)`.
///
/// Singular values start at `s₁ = κ · s₁(E)` and grow by independent Exp(1)
/// increments; they are reported largest first.
pub fn sim_lowrank(cfg: &LowRankSimConfig) -> Result<(DenseMatrix, LowRankTruth)> {
    cfg.validate()?;
    let (n, p, d) = (cfg.n, cfg.p, cfg.d_star);
    let mut x = gaussian_matrix(n, p, cfg.seed.substream(1));
    x.scale(1.0 / (n as f64).sqrt());
    let s1_noise = top_singular_value(&x, cfg.seed.substream(5))?;

    let mut rng = cfg.seed.substream(4).rng();
    let mut s = Vec::with_capacity(d);
    s.push(cfg.kappa * s1_noise);
    for j in 1..d {
        let nu: f64 = Exp1.sample(&mut rng);
        s.push(s[j - 1] + nu);
    }
    s.reverse();

    let u = uniform_stiefel(n, d, cfg.seed.substream(2))?;
    let v = uniform_stiefel(p, d, cfg.seed.substream(3))?;
    let mut us = u.clone();
    us.scale_cols(&s);
    let signal = matmul_nt(&us, &v)?;
    for (xi, si) in x.as_mut_slice().iter_mut().zip(signal.as_slice()) {
        *xi += si;
    }
    Ok((x, LowRankTruth { u, s, v, s1_noise }))
}

/// Largest singular value by Lanczos on `MMᵀ` (or `MᵀM`, whichever is smaller)
/// with full reorthogonalization, run until the top Ritz value settles.
pub fn top_singular_value(m: &DenseMatrix, seed: RngSeed) -> Result<f64> {
    let wide = m.n_rows() <= m.n_cols();
    let dim = if wide { m.n_rows() } else { m.n_cols() };
    let apply = |v: &[f64]| -> Result<Vec<f64>> {
        if wide {
            matvec(m, &matvec_t(m, v)?)
        } else {
            matvec_t(m, &matvec(m, v)?)
        }
    };
    let mut rng = seed.rng();
    let mut q: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
    let nq = norm2(&q);
    if nq == 0.0 {
        return Ok(0.0);
    }
    q.iter_mut().for_each(|v| *v /= nq);
    let max_steps = dim.min(300);
    let mut basis: Vec<Vec<f64>> = vec![q];
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut last = f64::NAN;
    for step in 0..max_steps {
        let mut w = apply(&basis[step])?;
        let a = dot(&w, &basis[step]);
        alpha.push(a);
        for _ in 0..2 {
            for b in &basis {
                let c = dot(&w, b);
                axpy(-c, b, &mut w);
            }
        }
        let k = alpha.len();
        let t = DenseMatrix::from_fn(k, k, |i, j| {
            if i == j {
                alpha[i]
            } else if i == j + 1 || j == i + 1 {
                beta[i.min(j)]
            } else {
                0.0
            }
        });
        let top = sym_eigen(&t, false)?.values[0];
        let bnorm = norm2(&w);
        if (top - last).abs() <= 1e-14 * top.abs() || bnorm <= 1e-14 * top.abs() {
            return Ok(top.max(0.0).sqrt());
        }
        last = top;
        if step + 1 == max_steps {
            break;
        }
        beta.push(bnorm);
        w.iter_mut().for_each(|v| *v /= bnorm);
        basis.push(w);
    }
    Ok(last.max(0.0).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdmixSimConfig {
    /// Individuals.
    pub n: usize,
    /// Variants.
    pub p: usize,
    pub n_pops: usize,
    /// Symmetric Dirichlet concentration of the ancestry proportions.
    pub alpha: f64,
    /// Population whose ancestry drives the phenotype (0-based).
    pub phenotype_pop: usize,
    pub seed: RngSeed,
}

impl AdmixSimConfig {
    pub fn new(n: usize, p: usize, n_pops: usize, alpha: f64, seed: impl Into<RngSeed>) -> Self {
        Self { n, p, n_pops, alpha, phenotype_pop: 0, seed: seed.into() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.p == 0 {
            return Err(Error::config("simulation needs n, p >= 1"));
        }
        if self.n_pops < 2 {
            return Err(Error::config("admixture needs at least 2 populations"));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::config("alpha must be positive"));
        }
        if self.phenotype_pop >= self.n_pops {
            return Err(Error::config("phenotype population out of range"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct AdmixtureTruth {
    /// n × K ancestry proportions, rows sum to one.
    pub theta: DenseMatrix,
    /// p × K allele frequencies.
    pub phi: DenseMatrix,
}

#[derive(Debug, Clone)]
pub struct AdmixtureSim {
    pub genotypes: GenotypeMatrix,
    /// Binary phenotype coded 0/1.
    pub phenotype: Vec<f64>,
    pub truth: AdmixtureTruth,
}

fn dirichlet_row<R: Rng>(k: usize, alpha: f64, rng: &mut R) -> Vec<f64> {
    let gamma = Gamma::new(alpha, 1.0).expect("alpha > 0");
    let mut g: Vec<f64> = (0..k).map(|_| gamma.sample(rng)).collect();
    let total: f64 = g.iter().sum();
    if total > 0.0 && total.is_finite() {
        g.iter_mut().for_each(|v| *v /= total);
    } else {
        // every gamma draw underflowed: the limit is a vertex of the simplex
        let hit = rng.random_range(0..k);
        g.iter_mut().enumerate().for_each(|(i, v)| *v = f64::from(u8::from(i == hit)));
    }
    g
}

fn categorical<R: Rng>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (k, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return k;
        }
    }
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// Admixed genotypes: `θᵢ ~ Dir(α)`, `φⱼₖ ~ Beta(1, 1)`, two allele copies per
/// site each drawn from population `z ~ Mult(θᵢ)` then `Bernoulli(φⱼ,z)`;
/// phenotype `yᵢ ~ Bernoulli(0.5 θᵢₖ + 0.1 (1 − θᵢₖ))`.
pub fn sim_admixture(cfg: &AdmixSimConfig) -> Result<AdmixtureSim> {
    cfg.validate()?;
    let (n, p, k) = (cfg.n, cfg.p, cfg.n_pops);
    let mut rng = cfg.seed.substream(1).rng();
    let theta_rows: Vec<Vec<f64>> = (0..n).map(|_| dirichlet_row(k, cfg.alpha, &mut rng)).collect();
    let theta = DenseMatrix::from_rows(&theta_rows)?;

    let mut rng = cfg.seed.substream(2).rng();
    let phi = DenseMatrix::from_fn(p, k, |_, _| rng.random::<f64>());

    let mut rng = cfg.seed.substream(3).rng();
    let mut raw = DenseMatrix::zeros(n, p);
    for i in 0..n {
        let th = &theta_rows[i];
        for j in 0..p {
            let mut g = 0.0;
            for _ in 0..2 {
                let z = categorical(th, &mut rng);
                if rng.random::<f64>() < phi[(j, z)] {
                    g += 1.0;
                }
            }
            raw[(i, j)] = g;
        }
    }

    let mut rng = cfg.seed.substream(4).rng();
    let phenotype = theta_rows
        .iter()
        .map(|th| {
            let w = th[cfg.phenotype_pop];
            let prob = 0.5 * w + 0.1 * (1.0 - w);
            f64::from(u8::from(rng.random::<f64>() < prob))
        })
        .collect();

    let ids = (0..p).map(|j| format!("v{}", j + 1)).collect();
    Ok(AdmixtureSim { genotypes: GenotypeMatrix::new(raw, ids)?, phenotype, truth: AdmixtureTruth { theta, phi } })
}

/// Signal part `U S Vᵀ` of a low-rank truth.
pub fn signal_matrix(truth: &LowRankTruth) -> Result<DenseMatrix> {
    let mut us = truth.u.clone();
    us.scale_cols(&truth.s);
    matmul(&us, &truth.v.transpose())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::svd_exact;

    #[test]
    fn lowrank_shapes_and_ordering() {
        let (x, truth) = sim_lowrank(&LowRankSimConfig::new(100, 80, 5, 2.0, 7)).unwrap();
        assert_eq!(x.shape(), (100, 80));
        assert!(truth.u.orthonormality_defect() <= 1e-10);
        assert!(truth.v.orthonormality_defect() <= 1e-10);
        assert!(truth.s.windows(2).all(|w| w[0] > w[1]));
        assert!((truth.s[4] - 2.0 * truth.s1_noise).abs() < 1e-12);
    }

    #[test]
    fn rank_one_has_single_signal_value() {
        let (_, truth) = sim_lowrank(&LowRankSimConfig::new(30, 20, 1, 3.0, 1)).unwrap();
        assert_eq!(truth.s.len(), 1);
        assert!((truth.s[0] - 3.0 * truth.s1_noise).abs() < 1e-12);
    }

    #[test]
    fn config_errors() {
        assert!(sim_lowrank(&LowRankSimConfig::new(10, 5, 6, 1.0, 1)).is_err());
        assert!(sim_lowrank(&LowRankSimConfig::new(10, 5, 2, 0.0, 1)).is_err());
        assert!(sim_admixture(&AdmixSimConfig::new(10, 5, 1, 1.0, 1)).is_err());
        assert!(sim_admixture(&AdmixSimConfig::new(10, 5, 2, -1.0, 1)).is_err());
    }

    #[test]
    fn lanczos_top_value_matches_exact() {
        let m = gaussian_matrix(60, 45, RngSeed::new(3));
        let exact = svd_exact(&m).unwrap().s[0];
        let got = top_singular_value(&m, RngSeed::new(4)).unwrap();
        assert!((got - exact).abs() / exact < 1e-10, "{got} vs {exact}");
        let got_t = top_singular_value(&m.transpose(), RngSeed::new(4)).unwrap();
        assert!((got_t - exact).abs() / exact < 1e-10);
    }

    #[test]
    fn admixture_entries_and_theta() {
        let sim = sim_admixture(&AdmixSimConfig::new(50, 40, 3, 1.0, 2)).unwrap();
        let g = sim.genotypes.raw();
        assert!(g.as_slice().iter().all(|&v| v == 0.0 || v == 1.0 || v == 2.0));
        for r in sim.truth.theta.rows_iter() {
            assert!((r.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }
        assert!(sim.truth.phi.as_slice().iter().all(|&v| (0.0..=1.0).contains(&v)));
        assert!(sim.phenotype.iter().all(|&v| v == 0.0 || v == 1.0));
    }

    #[test]
    fn deterministic_per_seed() {
        let a = sim_admixture(&AdmixSimConfig::new(20, 10, 2, 0.5, 9)).unwrap();
        let b = sim_admixture(&AdmixSimConfig::new(20, 10, 2, 0.5, 9)).unwrap();
        assert_eq!(a.genotypes.raw(), b.genotypes.raw());
        assert_eq!(a.phenotype, b.phenotype);
        let (x1, _) = sim_lowrank(&LowRankSimConfig::new(20, 15, 3, 1.0, 4)).unwrap();
        let (x2, _) = sim_lowrank(&LowRankSimConfig::new(20, 15, 3, 1.0, 4)).unwrap();
        assert_eq!(x1, x2);
    }
}
