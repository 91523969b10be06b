//! Seeded random streams.
//!
//! Every draw goes through ChaCha8 keyed by a 64-bit seed with a 64-bit stream
//! id selecting an independent sub-stream. Normal variates use the Ziggurat
//! sampler from `rand_distr`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::matrix::DenseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngSeed {
    pub seed: u64,
    pub stream: u64,
}

impl RngSeed {
    pub const fn new(seed: u64) -> Self {
        Self { seed, stream: 0 }
    }

    pub const fn with_stream(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    /// Derives a child stream. Children of distinct `(stream, tag)` pairs never collide
    /// for tags below 2^16, which is all this crate uses.
    pub fn substream(self, tag: u64) -> Self {
        Self { seed: self.seed, stream: self.stream.wrapping_mul(0x1_0000).wrapping_add(tag + 1) }
    }

    pub fn rng(self) -> ChaCha8Rng {
        let mut r = ChaCha8Rng::seed_from_u64(self.seed);
        r.set_stream(self.stream);
        r
    }
}

impl Default for RngSeed {
    fn default() -> Self {
        Self::new(0)
    }
}

impl From<u64> for RngSeed {
    fn from(seed: u64) -> Self {
        Self::new(seed)
    }
}

/// `rows × cols` matrix of independent standard normals.
pub fn gaussian_matrix(rows: usize, cols: usize, seed: RngSeed) -> DenseMatrix {
    let mut rng = seed.rng();
    let data: Vec<f64> = (0..rows * cols).map(|_| StandardNormal.sample(&mut rng)).collect();
    DenseMatrix::from_vec_unchecked(rows, cols, data)
}
