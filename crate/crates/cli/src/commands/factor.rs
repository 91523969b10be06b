use arsvd_core::geneig::{geneig_lowrank, pca, GenEigConfig, Reduction, SirKernel, SliceSpec};
use arsvd_core::{factorize, ArsvdConfig, DenseMatrix};
use serde_json::json;

use super::selection_summary;
use crate::args::{SirArgs, SvdArgs};
use crate::error::{CliError, CliResult};
use crate::io::{numbered, read_matrix, read_vector};
use crate::manifest::{to_value, Recorder};

pub fn run_svd(a: &SvdArgs, rec: &mut Recorder) -> CliResult<()> {
    let x = rec.stage("read", || read_matrix(&a.input))?;
    let cfg = a.factor.arsvd_config();
    let choice = a.factor.rank_choice();
    let (f, selection) = rec.stage("factorize", || Ok(factorize(&x, &cfg, &choice)?))?;
    let d = f.rank;
    rec.write_matrix("U.tsv", &f.u, Some(&numbered("u", d)))?;
    rec.write_matrix("S.tsv", &DenseMatrix::column(&f.s), Some(&["s".to_string()]))?;
    rec.write_matrix("V.tsv", &f.v, Some(&numbered("v", d)))?;
    let summary = selection.as_ref().map(selection_summary);
    let report = json!({
        "input_shape": [x.n_rows(), x.n_cols()],
        "rank": d,
        "iterations": f.iterations,
        "singular_values": f.s,
        "t_star": selection.as_ref().map(|s| s.t_star),
        "d_star": selection.as_ref().map(|s| s.d_star),
        "bicv_medians": summary.as_ref().map(|s| s["bicv_medians"].clone()),
        "selection": selection.as_ref().map(to_value),
    });
    rec.write_json("report.json", &report)?;
    rec.manifest.selection = summary;
    rec.manifest.results = json!({"rank": d, "iterations": f.iterations});
    Ok(())
}

pub fn run_pca(a: &SvdArgs, rec: &mut Recorder) -> CliResult<()> {
    let x = rec.stage("read", || read_matrix(&a.input))?;
    let cfg = a.factor.arsvd_config();
    let choice = a.factor.rank_choice();
    let res = rec.stage("pca", || Ok(pca(&x, &cfg, &choice)?))?;
    let d = res.explained_variance.len();
    rec.write_matrix("components.tsv", &res.components, Some(&numbered("pc", d)))?;
    rec.write_matrix("scores.tsv", &res.scores, Some(&numbered("pc", d)))?;
    rec.write_matrix("variance.tsv", &DenseMatrix::column(&res.explained_variance), Some(&["variance".into()]))?;
    rec.write_matrix("means.tsv", &DenseMatrix::column(&res.means), Some(&["mean".into()]))?;
    let summary = res.selection.as_ref().map(selection_summary);
    let report = json!({
        "input_shape": [x.n_rows(), x.n_cols()],
        "rank": d,
        "iterations": res.iterations,
        "explained_variance": res.explained_variance,
        "constant_columns": res.constant_columns,
        "t_star": res.selection.as_ref().map(|s| s.t_star),
        "d_star": res.selection.as_ref().map(|s| s.d_star),
        "bicv_medians": summary.as_ref().map(|s| s["bicv_medians"].clone()),
        "selection": res.selection.as_ref().map(to_value),
    });
    rec.write_json("report.json", &report)?;
    rec.manifest.selection = summary;
    rec.manifest.results = json!({"rank": d, "iterations": res.iterations});
    Ok(())
}

pub fn run_sir(a: &SirArgs, rec: &mut Recorder) -> CliResult<()> {
    let x = rec.stage("read", || read_matrix(&a.input))?;
    let y = read_vector(&a.response)?;
    if y.len() != x.n_rows() {
        return Err(CliError::Data(format!(
            "{} has {} rows but {} has {} values",
            a.input.display(),
            x.n_rows(),
            a.response.display(),
            y.len()
        )));
    }
    let slicing = if a.categorical { SliceSpec::Categorical } else { SliceSpec::Quantile(a.slices) };
    let kernel = SirKernel::from_response(&y, slicing)?;
    let gcfg = GenEigConfig {
        r: a.directions,
        ridge: a.ridge,
        reduction: if a.galerkin { Reduction::Galerkin } else { Reduction::Exact },
        ..GenEigConfig::default()
    };
    let res = rec.stage("geneig", || Ok(geneig_lowrank(&x, &kernel, &ArsvdConfig::new(1, 3, a.seed), &gcfg)?))?;
    let r = res.eigenvalues.len();
    rec.write_matrix("directions.tsv", &res.directions, Some(&numbered("g", r)))?;
    rec.write_matrix("eigenvalues.tsv", &DenseMatrix::column(&res.eigenvalues), Some(&["lambda".into()]))?;
    let report = json!({
        "slices": kernel.sizes(),
        "eigenvalues": res.eigenvalues,
        "gamma_rank": res.gamma_rank,
        "dropped_directions": res.dropped_directions,
        "degenerate": res.degenerate,
    });
    rec.write_json("report.json", &report)?;
    rec.manifest.results = report;
    Ok(())
}
