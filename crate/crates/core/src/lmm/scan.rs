use serde::{Deserialize, Serialize};

use crate::dist::chisq1_sf;
use crate::error::{Error, Result};
use crate::linalg::{cholesky, cholesky_solve};
use crate::matrix::{dot, matmul_tn, matvec_t, DenseMatrix};

use super::genotype::{GenotypeMatrix, StandardizedGenotypes};
use super::grm::GrmFactor;
use super::model::VarianceModel;

/// Why a variant has no informative test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssocFlag {
    Monomorphic,
    /// Nothing of the variant is left once the covariates are projected out.
    CollinearWithCovariates,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssocRecord {
    pub variant_id: String,
    /// Effect per standard deviation of the genotype.
    pub beta: f64,
    pub se: f64,
    /// Wald statistic `(β / se)²`, χ²₁ under the null.
    pub stat: f64,
    pub p_value: f64,
    pub flag: Option<AssocFlag>,
}

impl AssocRecord {
    fn uninformative(id: &str, flag: AssocFlag) -> Self {
        Self { variant_id: id.to_string(), beta: 0.0, se: f64::INFINITY, stat: 0.0, p_value: 1.0, flag: Some(flag) }
    }
}

const CHUNK: usize = 2048;

/// Generalized least squares Wald test of every requested variant.
///
/// Both phenotype and genotype are residualized on the covariates under `V`,
/// and the residual scale is re-estimated per variant, so the statistic is
/// invariant to an overall rescaling of `V`. With `σ_g² = 0` it is exactly the
/// ordinary least squares test.
pub fn assoc_scan(
    geno: &GenotypeMatrix,
    y: &[f64],
    covariates: &DenseMatrix,
    model: &VarianceModel,
    variants: Option<&[usize]>,
) -> Result<Vec<AssocRecord>> {
    assoc_scan_standardized(&geno.standardize()?, geno.variant_ids(), y, covariates, model, variants)
}

pub fn assoc_scan_standardized(
    z: &StandardizedGenotypes,
    ids: &[String],
    y: &[f64],
    covariates: &DenseMatrix,
    model: &VarianceModel,
    variants: Option<&[usize]>,
) -> Result<Vec<AssocRecord>> {
    let n = y.len();
    if z.matrix.n_rows() != n || covariates.n_rows() != n || model.grm().n() != n {
        return Err(Error::input("phenotype, genotypes, covariates and relationship factor disagree on n"));
    }
    let c = covariates.n_cols();
    if n <= c + 1 {
        return Err(Error::input("too few individuals for the covariates plus one variant"));
    }
    let all: Vec<usize>;
    let requested = match variants {
        Some(v) => v,
        None => {
            all = (0..ids.len()).collect();
            &all
        }
    };
    if let Some(&bad) = requested.iter().find(|&&j| j >= ids.len()) {
        return Err(Error::input(format!("variant index {bad} out of range")));
    }

    let u = &model.grm().u;
    let uy = model.rotate(y)?;
    let uc = matmul_tn(u, covariates)?;
    let ucols: Vec<Vec<f64>> = (0..c).map(|a| uc.col(a)).collect();
    let cy = matvec_t(covariates, y)?;
    let m_c = model.gram(covariates, &uc)?;
    let l_c = if c == 0 {
        None
    } else {
        Some(cholesky(&m_c).map_err(|_| Error::input("covariate columns are linearly dependent"))?)
    };
    let solve_c = |b: &[f64]| l_c.as_ref().map_or_else(Vec::new, |l| cholesky_solve(l, b));
    let b_y: Vec<f64> = (0..c).map(|a| model.quad(&ucols[a], &uy, cy[a])).collect();
    let beta_c = solve_c(&b_y);
    let yvy = model.quad(&uy, &uy, dot(y, y));
    let yy_t = yvy - dot(&b_y, &beta_c);
    let dof = (n - c - 1) as f64;

    let mut out = Vec::with_capacity(requested.len());
    for block in requested.chunks(CHUNK) {
        let pos: Vec<Option<usize>> = block.iter().map(|&j| z.position(j)).collect();
        let cols: Vec<usize> = pos.iter().flatten().copied().collect();
        let x = z.matrix.select_cols(&cols);
        let ux = matmul_tn(u, &x)?;
        let cx = matmul_tn(covariates, &x)?;
        let xy = matvec_t(&x, y)?;
        let mut k = 0;
        for (&j, p) in block.iter().zip(&pos) {
            if p.is_none() {
                out.push(AssocRecord::uninformative(&ids[j], AssocFlag::Monomorphic));
                continue;
            }
            let xk = x.col(k);
            let uxk = ux.col(k);
            let xvx = model.quad(&uxk, &uxk, dot(&xk, &xk));
            let cvx: Vec<f64> = (0..c).map(|a| model.quad(&ucols[a], &uxk, cx[(a, k)])).collect();
            let xvy = model.quad(&uxk, &uy, xy[k]);
            let solved = solve_c(&cvx);
            let xx_t = xvx - dot(&cvx, &solved);
            let xy_t = xvy - dot(&cvx, &beta_c);
            k += 1;
            if !(xx_t > 1e-10 * xvx) {
                out.push(AssocRecord::uninformative(&ids[j], AssocFlag::CollinearWithCovariates));
                continue;
            }
            let beta = xy_t / xx_t;
            let rss = (yy_t - beta * xy_t).max(0.0);
            let se = (rss / dof / xx_t).sqrt();
            let stat = if se > 0.0 { (beta / se).powi(2) } else { f64::INFINITY };
            out.push(AssocRecord {
                variant_id: ids[j].clone(),
                beta,
                se,
                stat,
                p_value: chisq1_sf(stat),
                flag: None,
            });
        }
    }
    Ok(out)
}

/// Ordinary least squares scan that ignores relatedness.
pub fn naive_scan(geno: &GenotypeMatrix, y: &[f64], covariates: &DenseMatrix) -> Result<Vec<AssocRecord>> {
    let none = GrmFactor::none(geno.n_individuals());
    let model = VarianceModel::new(&none, 0.0, 1.0)?;
    assoc_scan(geno, y, covariates, &model, None)
}
