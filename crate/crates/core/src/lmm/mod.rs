//! Linear mixed model association testing with a low-rank relationship matrix.
//!
//! The relationship matrix `K = G̃G̃ᵀ / p` is never formed. Its leading
//! eigenpairs come from a randomized factorization of the standardized
//! genotypes, and every product with `V⁻¹` goes through that eigenbasis.

mod genotype;
mod grm;
mod model;
mod null;
mod scan;

use serde::{Deserialize, Serialize};

pub use genotype::{GenotypeMatrix, StandardizedGenotypes};
pub use grm::{grm_factor, GrmFactor};
pub use model::VarianceModel;
pub use null::{fit_null, FitMethod, VarianceComponents, DELTA_GRID, DELTA_MAX, DELTA_MIN, LOG_DELTA_TOL};
pub use scan::{assoc_scan, assoc_scan_standardized, naive_scan, AssocFlag, AssocRecord};

use crate::arsvd::{ArsvdConfig, RankChoice};
use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::select::SelectionReport;

#[derive(Debug, Clone, Default)]
pub struct AssocOptions {
    pub arsvd: ArsvdConfig,
    pub rank: RankChoice,
    pub method: FitMethod,
    /// Raw variant indices per group. Variants of a group are tested against a
    /// relationship matrix built without that group.
    pub groups: Option<Vec<Vec<usize>>>,
}

/// One null-model fit and the relationship factor behind it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NullFit {
    /// Index of the excluded group, `None` for the genome-wide fit.
    pub group: Option<usize>,
    pub variance: VarianceComponents,
    pub grm_rank: usize,
    pub p_used: usize,
    pub iterations: usize,
    pub selection: Option<SelectionReport>,
}

#[derive(Debug, Clone)]
pub struct AssocRun {
    /// One record per raw variant, in input order.
    pub records: Vec<AssocRecord>,
    pub fits: Vec<NullFit>,
}

fn fit_and_scan(
    z: &StandardizedGenotypes,
    ids: &[String],
    y: &[f64],
    covariates: &DenseMatrix,
    opts: &AssocOptions,
    exclude: &[usize],
    targets: &[usize],
    group: Option<usize>,
) -> Result<(Vec<AssocRecord>, NullFit)> {
    let grm = grm_factor(z, exclude, &opts.arsvd, &opts.rank)?;
    let variance = fit_null(y, covariates, &grm, opts.method)?;
    let model = VarianceModel::new(&grm, variance.sigma_g2, variance.sigma_e2)?;
    let records = assoc_scan_standardized(z, ids, y, covariates, &model, Some(targets))?;
    let fit = NullFit {
        group,
        grm_rank: grm.rank(),
        p_used: grm.p_used,
        iterations: grm.iterations,
        selection: grm.selection,
        variance,
    };
    Ok((records, fit))
}

/// Null fit plus scan; with groups, each group is tested leaving itself out.
pub fn run_assoc(geno: &GenotypeMatrix, y: &[f64], covariates: &DenseMatrix, opts: &AssocOptions) -> Result<AssocRun> {
    let z = geno.standardize()?;
    let ids = geno.variant_ids();
    let p = geno.n_variants();
    let Some(groups) = &opts.groups else {
        let all: Vec<usize> = (0..p).collect();
        let (records, fit) = fit_and_scan(&z, ids, y, covariates, opts, &[], &all, None)?;
        return Ok(AssocRun { records, fits: vec![fit] });
    };
    let mut owner = vec![None; p];
    for (g, members) in groups.iter().enumerate() {
        for &j in members {
            if j >= p {
                return Err(Error::input(format!("group {g} names variant index {j}, only {p} variants")));
            }
            if owner[j].is_some() {
                return Err(Error::input(format!("variant {} belongs to two groups", ids[j])));
            }
            owner[j] = Some(g);
        }
    }
    let mut slots: Vec<Option<AssocRecord>> = vec![None; p];
    let mut fits = Vec::new();
    for (g, members) in groups.iter().enumerate() {
        if members.is_empty() {
            continue;
        }
        let (recs, fit) = fit_and_scan(&z, ids, y, covariates, opts, members, members, Some(g))?;
        for (&j, r) in members.iter().zip(recs) {
            slots[j] = Some(r);
        }
        fits.push(fit);
    }
    let rest: Vec<usize> = (0..p).filter(|&j| owner[j].is_none()).collect();
    if !rest.is_empty() {
        let (recs, fit) = fit_and_scan(&z, ids, y, covariates, opts, &[], &rest, None)?;
        for (&j, r) in rest.iter().zip(recs) {
            slots[j] = Some(r);
        }
        fits.push(fit);
    }
    Ok(AssocRun { records: slots.into_iter().map(|r| r.expect("every variant scanned")).collect(), fits })
}
