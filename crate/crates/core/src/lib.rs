//! Adaptive randomized SVD and the methods built on it.
//!
//! Modules, from the bottom up:
//!
//! * [`matrix`], [`rng`] and [`linalg`]: the dense row-major matrix, seeded
//!   Gaussian draws, and small exact factorizations (QR, SVD, symmetric eigen).
//! * [`arsvd`]: the two-stage randomized factorization with power blocks.
//! * [`select`]: stability scores, the Wilcoxon change point and
//!   bi-cross-validation, which pick the rank and the number of power iterations.
//! * [`geneig`]: PCA and the low-rank generalized eigenproblem for sliced inverse regression.
//! * [`lmm`]: mixed-model association scans with an implicit relationship matrix.
//! * [`simgen`]: low-rank-plus-noise and admixture simulators.
//! * [`dist`]: distribution tails for p-values.

pub mod arsvd;
pub mod dist;
pub mod error;
pub mod geneig;
pub mod linalg;
pub mod lmm;
pub mod matrix;
pub mod rng;
pub mod select;
pub mod simgen;

pub use arsvd::{
    arsvd_adaptive, arsvd_fixed, factorize, power_blocks, ArsvdConfig, LowRankFactorization, PowerBlock, RankChoice,
};
pub use error::{Error, Result};
pub use linalg::{qr_thin, svd_exact, sym_eigen, QrFactors, SvdFactors, SymEigen};
pub use matrix::DenseMatrix;
pub use rng::{gaussian_matrix, RngSeed};
pub use select::{SelectConfig, SelectionReport};

/// Version of this crate, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
