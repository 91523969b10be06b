use crate::arsvd::{factorize, ArsvdConfig, RankChoice};
use crate::error::{Error, Result};
use crate::matrix::{matmul_nt, DenseMatrix};
use crate::select::SelectionReport;

use super::genotype::StandardizedGenotypes;

/// Low-rank genetic relationship matrix `K ≈ U Λ Uᵀ`, where
/// `K = G̃G̃ᵀ / p_used` and `G̃` holds the standardized variants in use.
#[derive(Debug, Clone)]
pub struct GrmFactor {
    /// n × d orthonormal eigenvectors.
    pub u: DenseMatrix,
    /// Eigenvalues `s² / p_used`, non-increasing.
    pub lambda: Vec<f64>,
    pub p_used: usize,
    /// Power iterations behind the factor (0 when there is none).
    pub iterations: usize,
    pub selection: Option<SelectionReport>,
}

impl GrmFactor {
    /// A relationship matrix of rank zero: the model reduces to i.i.d. errors.
    pub fn none(n: usize) -> Self {
        Self { u: DenseMatrix::zeros(n, 0), lambda: vec![], p_used: 0, iterations: 0, selection: None }
    }

    pub fn n(&self) -> usize {
        self.u.n_rows()
    }

    pub fn rank(&self) -> usize {
        self.lambda.len()
    }

    /// `U Λ Uᵀ` as a dense matrix.
    pub fn dense(&self) -> DenseMatrix {
        let mut ul = self.u.clone();
        ul.scale_cols(&self.lambda);
        matmul_nt(&ul, &self.u).expect("consistent factor shapes")
    }
}

/// Builds the factor from all kept variants except the raw columns in `exclude`.
pub fn grm_factor(
    z: &StandardizedGenotypes,
    exclude: &[usize],
    cfg: &ArsvdConfig,
    choice: &RankChoice,
) -> Result<GrmFactor> {
    let cols: Vec<usize> = (0..z.kept.len()).filter(|&c| !exclude.contains(&z.kept[c])).collect();
    if cols.is_empty() {
        return Err(Error::input("no polymorphic variants left to build the relationship matrix"));
    }
    let g = if cols.len() == z.kept.len() { z.matrix.clone() } else { z.matrix.select_cols(&cols) };
    let p_used = cols.len();
    let (f, selection) = factorize(&g, cfg, choice)?;
    let lambda = f.s.iter().map(|s| s * s / p_used as f64).collect();
    Ok(GrmFactor { u: f.u, lambda, p_used, iterations: f.iterations, selection })
}
