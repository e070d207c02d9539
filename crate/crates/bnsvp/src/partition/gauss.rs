//! Multivariate Gaussian log-density with cached factorizations.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::partition::niw::cholesky_with_jitter;

const LN_2PI: f64 = 1.8378770664093453;

/// Sampled emission parameters of one (scene, component) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Emission {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

/// A Gaussian with its covariance pre-factorized for repeated evaluation.
#[derive(Debug, Clone)]
pub(crate) struct CholGaussian {
    mean: DVector<f64>,
    /// Lower Cholesky factor of the covariance.
    factor: DMatrix<f64>,
    /// `-(dim * ln 2 pi + ln det cov) / 2`.
    ln_norm: f64,
}

impl CholGaussian {
    pub(crate) fn new(mean: DVector<f64>, cov: &DMatrix<f64>) -> Result<Self> {
        if cov.nrows() != mean.len() || cov.ncols() != mean.len() {
            return Err(Error::Argument(format!(
                "covariance must be {0}x{0} to match the mean, got {1}x{2}",
                mean.len(),
                cov.nrows(),
                cov.ncols()
            )));
        }
        let (chol, _) = cholesky_with_jitter(cov)?;
        let factor = chol.l();
        let ln_det = 2.0 * factor.diagonal().iter().map(|d| d.ln()).sum::<f64>();
        let ln_norm = -0.5 * (mean.len() as f64 * LN_2PI + ln_det);
        Ok(CholGaussian { mean, factor, ln_norm })
    }

    /// Log-density at `x`.
    pub(crate) fn loglik(&self, x: &DVector<f64>) -> f64 {
        let diff = x - &self.mean;
        let whitened = self
            .factor
            .solve_lower_triangular(&diff)
            .expect("Cholesky factor has a positive diagonal");
        self.ln_norm - 0.5 * whitened.norm_squared()
    }

    /// Maps `x` through the inverse Cholesky factor, so that dot products of
    /// whitened vectors are Mahalanobis inner products `a^T cov^{-1} b`.
    pub(crate) fn whiten(&self, x: &DVector<f64>) -> DVector<f64> {
        self.factor
            .solve_lower_triangular(x)
            .expect("Cholesky factor has a positive diagonal")
    }
}

/// Log-density of a multivariate Gaussian, factorizing the covariance on
/// each call. For repeated evaluation against the same covariance prefer
/// the cached path used internally by the sampler.
pub fn emission_loglik(x: &DVector<f64>, mean: &DVector<f64>, cov: &DMatrix<f64>) -> Result<f64> {
    if x.len() != mean.len() {
        return Err(Error::Argument(format!(
            "point has dimension {}, mean has {}",
            x.len(),
            mean.len()
        )));
    }
    Ok(CholGaussian::new(mean.clone(), cov)?.loglik(x))
}
