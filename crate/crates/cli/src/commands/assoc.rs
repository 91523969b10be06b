use std::collections::HashMap;
use std::fmt::Write as _;

use arsvd_core::dist::ks_uniform_pvalue;
use arsvd_core::lmm::{naive_scan, run_assoc, AssocOptions, AssocRecord, FitMethod, NullFit};
use arsvd_core::DenseMatrix;
use serde_json::{json, Value};

use super::selection_summary;
use crate::args::AssocArgs;
use crate::error::{CliError, CliResult};
use crate::io::{format_f64, read_genotypes, read_groups, read_matrix, read_vector};
use crate::manifest::Recorder;

/// Histogram bins on `[0, 1]` for p-value plots.
pub const P_BINS: usize = 20;

/// Significance level used for the reported false-positive rate.
pub const ALPHA: f64 = 0.05;

fn tested_p_values(records: &[AssocRecord]) -> Vec<f64> {
    records.iter().filter(|r| r.flag.is_none()).map(|r| r.p_value).collect()
}

pub fn render_assoc(records: &[AssocRecord]) -> String {
    let mut out = String::from("#variant_id\tbeta\tse\tstat\tp\n");
    for r in records {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}",
            r.variant_id,
            format_f64(r.beta),
            format_f64(r.se),
            format_f64(r.stat),
            format_f64(r.p_value)
        );
    }
    out
}

pub fn render_histogram(p: &[f64]) -> String {
    let mut counts = [0usize; P_BINS];
    for &v in p {
        counts[((v * P_BINS as f64) as usize).min(P_BINS - 1)] += 1;
    }
    let expected = p.len() as f64 / P_BINS as f64;
    let mut out = String::from("#lower\tupper\tcount\texpected\n");
    for (b, c) in counts.iter().enumerate() {
        let lo = b as f64 / P_BINS as f64;
        let hi = (b + 1) as f64 / P_BINS as f64;
        let _ = writeln!(out, "{}\t{}\t{c}\t{}", format_f64(lo), format_f64(hi), format_f64(expected));
    }
    out
}

fn scan_summary(records: &[AssocRecord]) -> Value {
    let p = tested_p_values(records);
    let hits = p.iter().filter(|&&v| v < ALPHA).count();
    json!({
        "variants": records.len(),
        "tested": p.len(),
        "flagged": records.len() - p.len(),
        "alpha": ALPHA,
        "false_positive_rate": if p.is_empty() { None } else { Some(hits as f64 / p.len() as f64) },
        "ks_uniform_p": if p.is_empty() { None } else { Some(ks_uniform_pvalue(&p)) },
    })
}

fn fit_summary(fit: &NullFit, names: &[String]) -> Value {
    let v = &fit.variance;
    let total = v.sigma_g2 + v.sigma_e2;
    json!({
        "group": fit.group.map(|g| names[g].clone()),
        "sigma_g2": v.sigma_g2,
        "sigma_e2": v.sigma_e2,
        "delta": v.delta,
        "heritability": if total > 0.0 { Some(v.sigma_g2 / total) } else { None },
        "log_likelihood": v.log_likelihood,
        "method": v.method,
        "boundary": v.boundary,
        "flat": v.flat,
        "grm_rank": fit.grm_rank,
        "variants_in_grm": fit.p_used,
        "iterations": fit.iterations,
        "t_star": fit.selection.as_ref().map(|s| s.t_star),
        "d_star": fit.selection.as_ref().map(|s| s.d_star),
    })
}

fn write_text(rec: &mut Recorder, name: &str, text: &str, shape: (usize, usize)) -> CliResult<()> {
    let path = rec.path(name);
    std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
    rec.output(name, Some(shape));
    Ok(())
}

pub fn run_assoc_cmd(a: &AssocArgs, rec: &mut Recorder) -> CliResult<()> {
    let geno = rec.stage("read", || read_genotypes(&a.genotypes))?;
    let y = read_vector(&a.phenotype)?;
    let n = geno.n_individuals();
    if y.len() != n {
        return Err(CliError::Data(format!(
            "{} has {n} individuals but {} has {} values",
            a.genotypes.display(),
            a.phenotype.display(),
            y.len()
        )));
    }
    let mut cov = vec![vec![1.0; n]];
    if let Some(path) = &a.covariates {
        let c = read_matrix(path)?;
        if c.n_rows() != n {
            return Err(CliError::Data(format!(
                "{} has {n} individuals but {} has {} rows",
                a.genotypes.display(),
                path.display(),
                c.n_rows()
            )));
        }
        cov.extend((0..c.n_cols()).map(|j| c.col(j)));
    }
    let covariates = DenseMatrix::from_columns(&cov)?;

    let mut group_names = Vec::new();
    let groups = match &a.exclude_group {
        None => None,
        Some(path) => {
            let index: HashMap<&str, usize> =
                geno.variant_ids().iter().enumerate().map(|(j, id)| (id.as_str(), j)).collect();
            let mut members: Vec<Vec<usize>> = Vec::new();
            let mut slot: HashMap<String, usize> = HashMap::new();
            for (id, group) in read_groups(path)? {
                let Some(&j) = index.get(id.as_str()) else {
                    return Err(CliError::Data(format!(
                        "{}: variant {id} is not in {}",
                        path.display(),
                        a.genotypes.display()
                    )));
                };
                let g = *slot.entry(group.clone()).or_insert_with(|| {
                    group_names.push(group);
                    members.push(Vec::new());
                    members.len() - 1
                });
                members[g].push(j);
            }
            Some(members)
        }
    };

    let opts = AssocOptions {
        arsvd: a.factor.arsvd_config(),
        rank: a.factor.rank_choice(),
        method: if a.reml { FitMethod::Reml } else { FitMethod::Ml },
        groups,
    };
    let run = rec.stage("lmm", || Ok(run_assoc(&geno, &y, &covariates, &opts)?))?;
    let p = geno.n_variants();
    write_text(rec, "assoc.tsv", &render_assoc(&run.records), (p, 5))?;
    write_text(rec, "p_hist.tsv", &render_histogram(&tested_p_values(&run.records)), (P_BINS, 4))?;

    let mut results = json!({
        "individuals": n,
        "covariates": covariates.n_cols(),
        "lmm": scan_summary(&run.records),
        "fits": run.fits.iter().map(|f| fit_summary(f, &group_names)).collect::<Vec<_>>(),
    });
    rec.manifest.selection = run.fits.first().and_then(|f| f.selection.as_ref()).map(selection_summary);

    if a.naive {
        let naive = rec.stage("naive", || Ok(naive_scan(&geno, &y, &covariates)?))?;
        write_text(rec, "assoc_naive.tsv", &render_assoc(&naive), (p, 5))?;
        write_text(rec, "p_hist_naive.tsv", &render_histogram(&tested_p_values(&naive)), (P_BINS, 4))?;
        results["naive"] = scan_summary(&naive);
    }
    rec.manifest.results = results;
    Ok(())
}
