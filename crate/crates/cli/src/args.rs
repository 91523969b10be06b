use std::path::PathBuf;

use arsvd_core::{ArsvdConfig, RankChoice, SelectConfig};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "arsvd", version, about = "Adaptive randomized SVD and the analyses built on it")]
pub struct Cli {
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true, env = "ARSVD_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Low-rank factorization of a matrix file into U, S and V.
    Svd(SvdArgs),
    /// Principal components of the column-centered matrix.
    Pca(SvdArgs),
    /// Sliced inverse regression directions.
    Sir(SirArgs),
    /// Simulate data with known structure.
    Sim {
        #[command(subcommand)]
        kind: SimCommand,
    },
    /// Mixed-model association scan.
    Assoc(AssocArgs),
    /// Time the dense and randomized decompositions over a grid of sizes.
    Bench(BenchArgs),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FactorArgs {
    /// Upper bound on the rank considered.
    #[arg(long, default_value_t = 20)]
    pub d_max: usize,
    /// Largest number of power iterations considered.
    #[arg(long, default_value_t = 10)]
    pub t_max: usize,
    /// Oversampling columns beyond d-max.
    #[arg(long, default_value_t = 10)]
    pub delta: usize,
    /// Fixed rank; skips the adaptive selection.
    #[arg(long, conflicts_with = "adaptive")]
    pub rank: Option<usize>,
    /// Power iterations for a fixed rank (defaults to t-max).
    #[arg(long, requires = "rank")]
    pub t: Option<usize>,
    /// Select rank and iterations from the data (the default without --rank).
    #[arg(long)]
    pub adaptive: bool,
    /// Keep the selected rank even when held-out prediction does not beat zero.
    #[arg(long)]
    pub no_null_check: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl FactorArgs {
    pub fn arsvd_config(&self) -> ArsvdConfig {
        let d_max = self.rank.map_or(self.d_max, |r| r.max(1));
        let t_max = self.t.map_or(self.t_max, |t| t.max(self.t_max));
        ArsvdConfig::new(d_max, t_max, self.seed).with_delta(self.delta)
    }

    pub fn rank_choice(&self) -> RankChoice {
        match self.rank {
            Some(d) => RankChoice::Fixed { d, t: self.t.unwrap_or(self.t_max) },
            None => RankChoice::Adaptive(SelectConfig { null_check: !self.no_null_check, ..SelectConfig::default() }),
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SvdArgs {
    /// Input matrix (TSV).
    pub input: PathBuf,
    #[command(flatten)]
    pub factor: FactorArgs,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SirArgs {
    /// Predictor matrix (TSV), individuals in rows.
    pub input: PathBuf,
    /// Response, one value per row of the input.
    #[arg(long)]
    pub response: PathBuf,
    /// Number of quantile slices.
    #[arg(long, default_value_t = 10, conflicts_with = "categorical")]
    pub slices: usize,
    /// One slice per distinct response value.
    #[arg(long)]
    pub categorical: bool,
    /// Directions to return; all of them by default.
    #[arg(long)]
    pub directions: Option<usize>,
    /// Ridge added to the covariance diagonal.
    #[arg(long, default_value_t = 0.0)]
    pub ridge: f64,
    /// Restrict directions to the kernel factor's span instead of solving exactly.
    #[arg(long)]
    pub galerkin: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum SimCommand {
    /// Low-rank signal plus Gaussian noise.
    Lowrank(LowRankArgs),
    /// Admixed genotypes and an ancestry-driven binary phenotype.
    Admixture(AdmixtureArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct LowRankArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub p: usize,
    /// True rank of the signal.
    #[arg(long)]
    pub rank: usize,
    /// Ratio of the smallest signal value to the top noise value.
    #[arg(long, default_value_t = 2.0)]
    pub kappa: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct AdmixtureArgs {
    /// Individuals.
    #[arg(long)]
    pub n: usize,
    /// Variants.
    #[arg(long)]
    pub p: usize,
    #[arg(long, default_value_t = 3)]
    pub pops: usize,
    /// Dirichlet concentration of the ancestry proportions.
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    /// Population (1-based) whose ancestry drives the phenotype.
    #[arg(long, default_value_t = 1)]
    pub phenotype_pop: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct AssocArgs {
    /// Genotype TSV: variant_id, then one 0/1/2 column per individual.
    #[arg(long)]
    pub genotypes: PathBuf,
    /// Phenotype, one value per individual.
    #[arg(long)]
    pub phenotype: PathBuf,
    /// Extra covariates, individuals in rows. An intercept is always included.
    #[arg(long)]
    pub covariates: Option<PathBuf>,
    /// variant_id to group table; each group is tested against a relationship
    /// matrix built without it.
    #[arg(long)]
    pub exclude_group: Option<PathBuf>,
    /// Also run ordinary least squares, ignoring relatedness.
    #[arg(long)]
    pub naive: bool,
    /// Fit the variance components by restricted maximum likelihood.
    #[arg(long)]
    pub reml: bool,
    #[command(flatten)]
    pub factor: FactorArgs,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BenchMode {
    /// Full SVD of X.
    Svd,
    /// Dense symmetric eigendecomposition of XXᵀ.
    Eig,
    /// Randomized SVD at a fixed rank.
    Rsvd,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BenchArgs {
    /// Row counts, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub n_list: Vec<usize>,
    /// Column counts, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub p_list: Vec<usize>,
    /// Pair the lists element by element instead of taking every combination.
    #[arg(long)]
    pub paired: bool,
    /// Rank of the planted signal and of the randomized factorization.
    #[arg(long, default_value_t = 10)]
    pub rank: usize,
    /// Modes to time, comma separated.
    #[arg(long, value_enum, value_delimiter = ',', default_value = "rsvd")]
    pub mode: Vec<BenchMode>,
    /// Power iterations of the randomized factorization.
    #[arg(long, default_value_t = 2)]
    pub t: usize,
    /// Timed repetitions per size; the fastest is kept.
    #[arg(long, default_value_t = 1)]
    pub repeats: usize,
    /// Dense modes whose estimated cost exceeds this many flops are skipped.
    #[arg(long, default_value_t = 2e10)]
    pub max_dense_flops: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    /// Manifest written by an earlier run.
    pub manifest: PathBuf,
    /// Write outputs here instead of the recorded directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
