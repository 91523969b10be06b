use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cholesky, cholesky_logdet, cholesky_solve};
use crate::matrix::{dot, matmul_tn, matvec_t, DenseMatrix};

use super::grm::GrmFactor;

/// Likelihood used to fit the variance components.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum FitMethod {
    #[default]
    Ml,
    Reml,
}

/// Search range and resolution for `δ = σ_e² / σ_g²`.
pub const DELTA_MIN: f64 = 1e-5;
pub const DELTA_MAX: f64 = 1e5;
pub const DELTA_GRID: usize = 100;
pub const LOG_DELTA_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceComponents {
    pub sigma_g2: f64,
    pub sigma_e2: f64,
    /// `σ_e² / σ_g²`; infinite when the relationship matrix has rank zero.
    pub delta: f64,
    pub log_likelihood: f64,
    pub method: FitMethod,
    /// Null fixed-effect estimates, one per covariate column.
    pub beta: Vec<f64>,
    /// The optimum sits at an end of the `δ` search range.
    pub boundary: bool,
    /// The likelihood does not vary with `δ`, so the split between `σ_g²` and
    /// `σ_e²` is not identified. The fit is then reported at `δ = 1e5`.
    pub flat: bool,
}

/// Quantities of the null model that do not depend on `δ`.
struct NullData<'a> {
    grm: &'a GrmFactor,
    n: usize,
    uy: Vec<f64>,
    uc: DenseMatrix,
    yy: f64,
    cy: Vec<f64>,
    cc: DenseMatrix,
    logdet_cc: f64,
}

struct Evaluation {
    ll: f64,
    sigma2: f64,
    beta: Vec<f64>,
}

impl<'a> NullData<'a> {
    fn new(y: &[f64], c: &DenseMatrix, grm: &'a GrmFactor) -> Result<Self> {
        let n = y.len();
        if c.n_rows() != n || grm.n() != n {
            return Err(Error::input(format!(
                "phenotype has {n} entries, covariates {} rows, relationship factor {} rows",
                c.n_rows(),
                grm.n()
            )));
        }
        if n <= c.n_cols() + 1 {
            return Err(Error::input("more covariates than the sample size supports"));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("phenotype has non-finite entries"));
        }
        let cc = matmul_tn(c, c)?;
        let logdet_cc = if c.n_cols() == 0 {
            0.0
        } else {
            cholesky_logdet(
                &cholesky(&cc).map_err(|_| Error::input("covariate columns are linearly dependent"))?,
            )
        };
        Ok(Self {
            grm,
            n,
            uy: matvec_t(&grm.u, y)?,
            uc: matmul_tn(&grm.u, c)?,
            yy: dot(y, y),
            cy: matvec_t(c, y)?,
            cc,
            logdet_cc,
        })
    }

    /// Weighted products with `H = K + δI`; `δ = ∞` means `H ∝ I`.
    fn quad(&self, w: &[f64], w_perp: f64, ua: &[f64], ub: &[f64], ab: f64) -> f64 {
        let mut inside = 0.0;
        let mut along = 0.0;
        for ((wi, a), b) in w.iter().zip(ua).zip(ub) {
            inside += wi * a * b;
            along += a * b;
        }
        inside + w_perp * (ab - along)
    }

    fn evaluate(&self, delta: f64, method: FitMethod) -> Result<Evaluation> {
        let d = self.grm.rank();
        let k = self.cc.n_cols();
        let (w, w_perp, logdet_h) = if delta.is_infinite() {
            (vec![1.0; d], 1.0, 0.0)
        } else {
            let w: Vec<f64> = self.grm.lambda.iter().map(|l| 1.0 / (l + delta)).collect();
            let ld = self.grm.lambda.iter().map(|l| (l + delta).ln()).sum::<f64>() + (self.n - d) as f64 * delta.ln();
            (w, 1.0 / delta, ld)
        };
        let ucols: Vec<Vec<f64>> = (0..k).map(|a| self.uc.col(a)).collect();
        let mut a = DenseMatrix::zeros(k, k);
        let mut b = vec![0.0; k];
        for i in 0..k {
            for j in i..k {
                let v = self.quad(&w, w_perp, &ucols[i], &ucols[j], self.cc[(i, j)]);
                a[(i, j)] = v;
                a[(j, i)] = v;
            }
            b[i] = self.quad(&w, w_perp, &ucols[i], &self.uy, self.cy[i]);
        }
        let yhy = self.quad(&w, w_perp, &self.uy, &self.uy, self.yy);
        let (beta, logdet_a) = if k == 0 {
            (vec![], 0.0)
        } else {
            let l = cholesky(&a)?;
            (cholesky_solve(&l, &b), cholesky_logdet(&l))
        };
        let rss = yhy - dot(&b, &beta);
        if !(rss > 0.0) {
            return Err(Error::Numerical("phenotype lies in the covariate span; nothing left to model".into()));
        }
        let two_pi = 2.0 * std::f64::consts::PI;
        let (ll, sigma2) = match method {
            FitMethod::Ml => {
                let nf = self.n as f64;
                let s2 = rss / nf;
                (-0.5 * (nf * (two_pi * s2).ln() + logdet_h + nf), s2)
            }
            FitMethod::Reml => {
                let m = (self.n - k) as f64;
                let s2 = rss / m;
                (-0.5 * (m * (two_pi * s2).ln() + logdet_h + logdet_a - self.logdet_cc + m), s2)
            }
        };
        Ok(Evaluation { ll, sigma2, beta })
    }
}

/// Fits `y = Cβ + g + e` with `g ~ N(0, σ_g² K)` and `e ~ N(0, σ_e² I)`.
///
/// `δ` is profiled on a log grid over `[1e-5, 1e5]` and refined by golden
/// section to `1e-6` in `log δ`.
pub fn fit_null(y: &[f64], covariates: &DenseMatrix, grm: &GrmFactor, method: FitMethod) -> Result<VarianceComponents> {
    let data = NullData::new(y, covariates, grm)?;
    if grm.rank() == 0 {
        let e = data.evaluate(f64::INFINITY, method)?;
        return Ok(VarianceComponents {
            sigma_g2: 0.0,
            sigma_e2: e.sigma2,
            delta: f64::INFINITY,
            log_likelihood: e.ll,
            method,
            beta: e.beta,
            boundary: false,
            flat: false,
        });
    }
    let (lo, hi) = (DELTA_MIN.ln(), DELTA_MAX.ln());
    let step = (hi - lo) / (DELTA_GRID - 1) as f64;
    let grid: Vec<f64> = (0..DELTA_GRID).map(|i| lo + step * i as f64).collect();
    let mut lls = Vec::with_capacity(DELTA_GRID);
    for &g in &grid {
        lls.push(data.evaluate(g.exp(), method)?.ll);
    }
    let best = (0..DELTA_GRID).fold(0, |b, i| if lls[i] > lls[b] { i } else { b });
    let worst = lls.iter().copied().fold(f64::INFINITY, f64::min);
    if lls[best] - worst <= 1e-9 * (1.0 + lls[best].abs()) {
        let e = data.evaluate(DELTA_MAX, method)?;
        return Ok(VarianceComponents {
            sigma_g2: e.sigma2,
            sigma_e2: DELTA_MAX * e.sigma2,
            delta: DELTA_MAX,
            log_likelihood: e.ll,
            method,
            beta: e.beta,
            boundary: true,
            flat: true,
        });
    }
    let boundary = best == 0 || best == DELTA_GRID - 1;
    let mut a = grid[best.saturating_sub(1)];
    let mut b = grid[(best + 1).min(DELTA_GRID - 1)];
    let ll_at = |g: f64| data.evaluate(g.exp(), method).map(|e| e.ll);
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - ratio * (b - a);
    let mut x2 = a + ratio * (b - a);
    let mut f1 = ll_at(x1)?;
    let mut f2 = ll_at(x2)?;
    while b - a > LOG_DELTA_TOL {
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - ratio * (b - a);
            f1 = ll_at(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + ratio * (b - a);
            f2 = ll_at(x2)?;
        }
    }
    let mut log_delta = 0.5 * (a + b);
    let mut e = data.evaluate(log_delta.exp(), method)?;
    if lls[best] > e.ll {
        log_delta = grid[best];
        e = data.evaluate(log_delta.exp(), method)?;
    }
    let delta = log_delta.exp();
    Ok(VarianceComponents {
        sigma_g2: e.sigma2,
        sigma_e2: delta * e.sigma2,
        delta,
        log_likelihood: e.ll,
        method,
        beta: e.beta,
        boundary,
        flat: false,
    })
}
