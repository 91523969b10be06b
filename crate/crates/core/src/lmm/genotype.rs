use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;

/// Allele counts, one row per individual and one column per variant.
#[derive(Debug, Clone, PartialEq)]
pub struct GenotypeMatrix {
    raw: DenseMatrix,
    variant_ids: Vec<String>,
}

impl GenotypeMatrix {
    pub fn new(raw: DenseMatrix, variant_ids: Vec<String>) -> Result<Self> {
        if variant_ids.len() != raw.n_cols() {
            return Err(Error::input(format!(
                "{} variant ids for {} genotype columns",
                variant_ids.len(),
                raw.n_cols()
            )));
        }
        if raw.n_rows() < 2 {
            return Err(Error::input("genotypes need at least 2 individuals"));
        }
        let p = raw.n_cols();
        if let Some(pos) = raw.as_slice().iter().position(|&g| g != 0.0 && g != 1.0 && g != 2.0) {
            return Err(Error::input(format!(
                "genotype of variant {} for individual {} is {}; expected 0, 1 or 2",
                variant_ids[pos % p],
                pos / p + 1,
                raw.as_slice()[pos]
            )));
        }
        Ok(Self { raw, variant_ids })
    }

    /// Variants named `v1 … vp`.
    pub fn unnamed(raw: DenseMatrix) -> Result<Self> {
        let ids = (0..raw.n_cols()).map(|j| format!("v{}", j + 1)).collect();
        Self::new(raw, ids)
    }

    pub fn raw(&self) -> &DenseMatrix {
        &self.raw
    }

    pub fn variant_ids(&self) -> &[String] {
        &self.variant_ids
    }

    pub fn n_individuals(&self) -> usize {
        self.raw.n_rows()
    }

    pub fn n_variants(&self) -> usize {
        self.raw.n_cols()
    }

    /// Centers every variant and scales it to unit variance (divisor `n`).
    /// Monomorphic variants are set aside rather than divided by zero.
    pub fn standardize(&self) -> Result<StandardizedGenotypes> {
        let (n, p) = self.raw.shape();
        let means = self.raw.col_means();
        let mut sd = vec![0.0; p];
        for row in self.raw.rows_iter() {
            for (j, &g) in row.iter().enumerate() {
                let c = g - means[j];
                sd[j] += c * c;
            }
        }
        for v in sd.iter_mut() {
            *v = (*v / n as f64).sqrt();
        }
        let kept: Vec<usize> = (0..p).filter(|&j| sd[j] > 1e-12 * (1.0 + means[j].abs())).collect();
        if kept.is_empty() {
            return Err(Error::input("every variant is monomorphic"));
        }
        let dropped: Vec<usize> = (0..p).filter(|j| !kept.contains(j)).collect();
        let mut z = self.raw.select_cols(&kept);
        let (m, s): (Vec<f64>, Vec<f64>) = kept.iter().map(|&j| (means[j], sd[j])).unzip();
        z.map_cols(|j, v| (v - m[j]) / s[j]);
        Ok(StandardizedGenotypes { matrix: z, kept, dropped, means, sds: sd })
    }
}

/// Standardized polymorphic variants plus the bookkeeping needed to map back
/// to the raw columns.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardizedGenotypes {
    /// n × (number of kept variants).
    pub matrix: DenseMatrix,
    /// Raw column index of every kept variant.
    pub kept: Vec<usize>,
    /// Raw column indices of monomorphic variants.
    pub dropped: Vec<usize>,
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
}

impl StandardizedGenotypes {
    /// Position in [`Self::matrix`] of raw column `j`, if it was kept.
    pub fn position(&self, j: usize) -> Option<usize> {
        self.kept.binary_search(&j).ok()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standardize_example() {
        let raw = DenseMatrix::from_rows(&[[0.0, 1.0], [1.0, 1.0], [2.0, 1.0], [1.0, 1.0]]).unwrap();
        let g = GenotypeMatrix::unnamed(raw).unwrap();
        let z = g.standardize().unwrap();
        assert_eq!(z.kept, vec![0]);
        assert_eq!(z.dropped, vec![1]);
        let r = 2f64.sqrt();
        let want = [-r, 0.0, r, 0.0];
        for (a, b) in z.matrix.col(0).iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(z.position(0), Some(0));
        assert_eq!(z.position(1), None);
    }

    #[test]
    fn all_monomorphic_is_an_error() {
        let g = GenotypeMatrix::unnamed(DenseMatrix::from_fn(4, 2, |_, _| 2.0)).unwrap();
        assert!(g.standardize().is_err());
    }

    #[test]
    fn id_count_must_match() {
        let raw = DenseMatrix::zeros(3, 2);
        assert!(GenotypeMatrix::new(raw, vec!["a".into()]).is_err());
    }
}
