use crate::error::{Error, Result};
use crate::matrix::{dot, matmul_tn, matvec_t, DenseMatrix};

use super::grm::GrmFactor;

/// Covariance `V = σ_g² U Λ Uᵀ + σ_e² I` handled through the eigenbasis of the
/// relationship factor. On `span(U)` the inverse acts as `1 / (σ_g² λ + σ_e²)`;
/// on the orthogonal complement it acts as `1 / σ_e²`.
#[derive(Debug, Clone)]
pub struct VarianceModel<'a> {
    grm: &'a GrmFactor,
    pub sigma_g2: f64,
    pub sigma_e2: f64,
    weights: Vec<f64>,
    weight_perp: f64,
}

impl<'a> VarianceModel<'a> {
    pub fn new(grm: &'a GrmFactor, sigma_g2: f64, sigma_e2: f64) -> Result<Self> {
        if !(sigma_g2 >= 0.0 && sigma_g2.is_finite()) {
            return Err(Error::input(format!("genetic variance {sigma_g2} must be finite and non-negative")));
        }
        if !(sigma_e2 > 0.0 && sigma_e2.is_finite()) {
            return Err(Error::input(format!("residual variance {sigma_e2} must be positive")));
        }
        let weights = grm.lambda.iter().map(|l| 1.0 / (sigma_g2 * l + sigma_e2)).collect();
        Ok(Self { grm, sigma_g2, sigma_e2, weights, weight_perp: 1.0 / sigma_e2 })
    }

    pub fn grm(&self) -> &GrmFactor {
        self.grm
    }

    /// `Uᵀ w`.
    pub fn rotate(&self, w: &[f64]) -> Result<Vec<f64>> {
        matvec_t(&self.grm.u, w)
    }

    /// `aᵀ V⁻¹ b` from the rotated vectors and the plain inner product `aᵀ b`.
    pub fn quad(&self, ua: &[f64], ub: &[f64], ab: f64) -> f64 {
        let mut inside = 0.0;
        let mut along = 0.0;
        for ((w, a), b) in self.weights.iter().zip(ua).zip(ub) {
            inside += w * a * b;
            along += a * b;
        }
        inside + self.weight_perp * (ab - along)
    }

    /// `V⁻¹ w`.
    pub fn apply_inverse(&self, w: &[f64]) -> Result<Vec<f64>> {
        let uw = self.rotate(w)?;
        let mut out: Vec<f64> = w.iter().map(|v| v * self.weight_perp).collect();
        let u = &self.grm.u;
        let coef: Vec<f64> = uw.iter().zip(&self.weights).map(|(a, wi)| a * (wi - self.weight_perp)).collect();
        for (i, o) in out.iter_mut().enumerate() {
            *o += dot(u.row(i), &coef);
        }
        Ok(out)
    }

    /// `Cᵀ V⁻¹ C` for an n × c matrix, given `UᵀC` (d × c).
    pub fn gram(&self, c: &DenseMatrix, uc: &DenseMatrix) -> Result<DenseMatrix> {
        let cc = matmul_tn(c, c)?;
        let k = c.n_cols();
        let mut out = DenseMatrix::zeros(k, k);
        for a in 0..k {
            let ua = uc.col(a);
            for b in a..k {
                let v = self.quad(&ua, &uc.col(b), cc[(a, b)]);
                out[(a, b)] = v;
                out[(b, a)] = v;
            }
        }
        Ok(out)
    }
}
