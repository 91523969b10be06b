//! Shared inputs for the criterion benchmarks.

use arsvd_core::simgen::{sim_lowrank, LowRankSimConfig};
use arsvd_core::DenseMatrix;

/// Planted rank of every benchmark matrix.
pub const RANK: usize = 10;

/// Shapes used by the size sweeps, smallest first.
pub const SHAPES: [(usize, usize); 3] = [(200, 400), (400, 1600), (800, 3200)];

/// Low-rank plus noise matrix with a clear spectral gap.
pub fn fixture(n: usize, p: usize, seed: u64) -> DenseMatrix {
    sim_lowrank(&LowRankSimConfig::new(n, p, RANK, 3.0, seed)).expect("benchmark shape is valid").0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixture_has_requested_shape() {
        assert_eq!(fixture(30, 50, 1).shape(), (30, 50));
    }
}
