use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::tree::PhyloTree;

/// Added to the diagonal of every tree correlation matrix before factorizing.
pub const COVARIANCE_JITTER: f64 = 1e-10;

/// Cholesky-derived quantities of a tree correlation matrix `Σ`, shared by
/// every Gaussian density evaluated under that tree.
#[derive(Debug, Clone)]
pub struct TreeCovariance {
    factor: DMatrix<f64>,
    precision: DMatrix<f64>,
    log_det: f64,
    precision_ones: DVector<f64>,
    ones_precision_ones: f64,
}

impl TreeCovariance {
    pub fn new(tree: &PhyloTree) -> Result<Self> {
        Self::from_matrix(tree.correlation_matrix())
    }

    /// Factorize `sigma + jitter * I`.
    pub fn from_matrix(mut sigma: DMatrix<f64>) -> Result<Self> {
        let n = sigma.nrows();
        for i in 0..n {
            sigma[(i, i)] += COVARIANCE_JITTER;
        }
        let chol = sigma.cholesky().ok_or(Error::SingularCovariance)?;
        let factor = chol.l();
        let log_det = 2.0 * factor.diagonal().iter().map(|d| d.ln()).sum::<f64>();
        let mut precision = chol.inverse();
        // symmetrize away rounding
        for i in 0..n {
            for j in 0..i {
                let avg = 0.5 * (precision[(i, j)] + precision[(j, i)]);
                precision[(i, j)] = avg;
                precision[(j, i)] = avg;
            }
        }
        if !log_det.is_finite() || precision.iter().any(|x| !x.is_finite()) {
            return Err(Error::SingularCovariance);
        }
        let precision_ones = DVector::from_iterator(n, precision.row_iter().map(|r| r.sum()));
        let ones_precision_ones = precision_ones.sum();
        Ok(TreeCovariance { factor, precision, log_det, precision_ones, ones_precision_ones })
    }

    pub fn dim(&self) -> usize {
        self.precision.nrows()
    }

    /// Lower Cholesky factor `L` with `L Lᵀ = Σ`.
    pub fn factor(&self) -> &DMatrix<f64> {
        &self.factor
    }

    pub fn precision(&self) -> &DMatrix<f64> {
        &self.precision
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    /// `Σ⁻¹ 1`.
    pub fn precision_ones(&self) -> &DVector<f64> {
        &self.precision_ones
    }

    /// `1ᵀ Σ⁻¹ 1`.
    pub fn ones_precision_ones(&self) -> f64 {
        self.ones_precision_ones
    }

    /// `rᵀ Σ⁻¹ r`.
    pub fn quad(&self, r: &[f64]) -> f64 {
        let n = self.dim();
        let p = &self.precision;
        let mut total = 0.0;
        for j in 0..n {
            let col = p.column(j);
            let mut acc = 0.0;
            for i in 0..n {
                acc += col[i] * r[i];
            }
            total += acc * r[j];
        }
        total
    }

    /// `(Σ⁻¹ r)_v`.
    pub fn precision_dot(&self, v: usize, r: &[f64]) -> f64 {
        self.precision.column(v).iter().zip(r).map(|(p, x)| p * x).sum()
    }

    /// `tr(Σ⁻¹ S)` for a symmetric `S`.
    pub fn trace_product(&self, s: &DMatrix<f64>) -> f64 {
        self.precision.iter().zip(s.iter()).map(|(p, x)| p * x).sum()
    }
}
