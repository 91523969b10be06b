use arsvd_core::simgen::{sim_admixture, sim_lowrank, AdmixSimConfig, LowRankSimConfig};
use arsvd_core::DenseMatrix;
use serde_json::json;

use crate::args::{AdmixtureArgs, LowRankArgs};
use crate::error::{CliError, CliResult};
use crate::io::{numbered, write_genotypes};
use crate::manifest::Recorder;

pub fn run_lowrank(a: &LowRankArgs, rec: &mut Recorder) -> CliResult<()> {
    let cfg = LowRankSimConfig::new(a.n, a.p, a.rank, a.kappa, a.seed);
    let (x, truth) = rec.stage("simulate", || Ok(sim_lowrank(&cfg)?))?;
    rec.write_matrix("X.tsv", &x, None)?;
    rec.write_matrix("truth_U.tsv", &truth.u, Some(&numbered("u", a.rank)))?;
    rec.write_matrix("truth_S.tsv", &DenseMatrix::column(&truth.s), Some(&["s".into()]))?;
    rec.write_matrix("truth_V.tsv", &truth.v, Some(&numbered("v", a.rank)))?;
    let summary = json!({"s1_noise": truth.s1_noise, "singular_values": truth.s, "config": cfg});
    rec.write_json("truth.json", &summary)?;
    rec.manifest.results = summary;
    Ok(())
}

pub fn run_admixture(a: &AdmixtureArgs, rec: &mut Recorder) -> CliResult<()> {
    if a.phenotype_pop == 0 {
        return Err(CliError::Usage("--phenotype-pop is 1-based".into()));
    }
    let cfg = AdmixSimConfig { phenotype_pop: a.phenotype_pop - 1, ..AdmixSimConfig::new(a.n, a.p, a.pops, a.alpha, a.seed) };
    let sim = rec.stage("simulate", || Ok(sim_admixture(&cfg)?))?;
    rec.write_matrix("X.tsv", sim.genotypes.raw(), Some(sim.genotypes.variant_ids()))?;
    write_genotypes(&rec.path("genotypes.tsv"), &sim.genotypes)?;
    rec.output("genotypes.tsv", Some((a.p, a.n + 1)));
    rec.write_matrix("phenotype.tsv", &DenseMatrix::column(&sim.phenotype), Some(&["y".into()]))?;
    rec.write_matrix("theta.tsv", &sim.truth.theta, Some(&numbered("pop", a.pops)))?;
    rec.write_matrix("phi.tsv", &sim.truth.phi, Some(&numbered("pop", a.pops)))?;
    let cases = sim.phenotype.iter().filter(|&&v| v == 1.0).count();
    rec.manifest.results = json!({"config": cfg, "cases": cases, "controls": a.n - cases});
    Ok(())
}
