//! Normal-inverse-Wishart prior: conjugate updates and posterior sampling.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::error::{Error, Result};

/// Symmetry slack accepted when validating scale matrices.
const SYMMETRY_TOL: f64 = 1e-9;

/// Parameters of a normal-inverse-Wishart distribution over a Gaussian's
/// mean and covariance. Serves as both prior and posterior.
#[derive(Debug, Clone, PartialEq)]
pub struct NiwPrior {
    /// Prior mean of the Gaussian mean.
    pub mean: DVector<f64>,
    /// Pseudo-count tying the mean to `mean`.
    pub kappa: f64,
    /// Degrees of freedom of the inverse-Wishart part.
    pub dof: f64,
    /// Scale matrix of the inverse-Wishart part.
    pub scale: DMatrix<f64>,
}

impl NiwPrior {
    /// Builds a prior after validating every parameter.
    pub fn new(mean: DVector<f64>, kappa: f64, dof: f64, scale: DMatrix<f64>) -> Result<Self> {
        let prior = NiwPrior { mean, kappa, dof, scale };
        prior.validate()?;
        Ok(prior)
    }

    /// Default data-dependent prior: empirical mean and covariance with a
    /// small pseudo-count and the weakest proper degrees of freedom.
    pub fn from_data(features: &DMatrix<f64>) -> Result<Self> {
        if features.nrows() == 0 || features.ncols() == 0 {
            return Err(Error::Argument(
                "prior construction needs a non-empty feature matrix".into(),
            ));
        }
        let dim = features.ncols();
        let mean = column_mean(features);
        let mut scale = scatter_about(features, &mean);
        if features.nrows() > 1 {
            scale /= (features.nrows() - 1) as f64;
        }
        // A ridge keeps the scale positive definite even for degenerate data.
        let ridge = (1e-6 * scale.trace() / dim as f64).max(1e-6);
        for d in 0..dim {
            scale[(d, d)] += ridge;
        }
        NiwPrior::new(mean, 0.1, dim as f64 + 2.0, scale)
    }

    /// Feature dimensionality this prior describes.
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Checks parameter ranges, symmetry, and positive definiteness.
    pub fn validate(&self) -> Result<()> {
        let dim = self.mean.len();
        if dim == 0 {
            return Err(Error::Argument("prior mean must be non-empty".into()));
        }
        if self.mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::Argument("prior mean must be finite".into()));
        }
        if !(self.kappa > 0.0) || !self.kappa.is_finite() {
            return Err(Error::Argument(format!(
                "kappa must be positive and finite, got {}",
                self.kappa
            )));
        }
        if !(self.dof > dim as f64 - 1.0) || !self.dof.is_finite() {
            return Err(Error::Argument(format!(
                "dof must exceed dim - 1 = {}, got {}",
                dim as f64 - 1.0,
                self.dof
            )));
        }
        if self.scale.nrows() != dim || self.scale.ncols() != dim {
            return Err(Error::Argument(format!(
                "scale must be {dim}x{dim}, got {}x{}",
                self.scale.nrows(),
                self.scale.ncols()
            )));
        }
        for i in 0..dim {
            for j in 0..dim {
                let v = self.scale[(i, j)];
                if !v.is_finite() {
                    return Err(Error::Argument("scale must be finite".into()));
                }
                if (v - self.scale[(j, i)]).abs() > SYMMETRY_TOL {
                    return Err(Error::Argument("scale must be symmetric".into()));
                }
            }
        }
        if Cholesky::new(self.scale.clone()).is_none() {
            return Err(Error::Argument("scale must be positive definite".into()));
        }
        Ok(())
    }

    /// Conjugate update with observed points (one row per observation).
    /// Zero rows return the prior unchanged.
    pub fn posterior(&self, data: &DMatrix<f64>) -> Result<NiwPrior> {
        if data.nrows() == 0 {
            return Ok(self.clone());
        }
        if data.ncols() != self.dim() {
            return Err(Error::Argument(format!(
                "data has dimension {}, prior has {}",
                data.ncols(),
                self.dim()
            )));
        }
        let n = data.nrows() as f64;
        let data_mean = column_mean(data);
        let kappa = self.kappa + n;
        let dof = self.dof + n;
        let mean = (&self.mean * self.kappa + &data_mean * n) / kappa;
        let centered = &data_mean - &self.mean;
        let scale = &self.scale
            + scatter_about(data, &data_mean)
            + (self.kappa * n / kappa) * &centered * centered.transpose();
        Ok(NiwPrior { mean, kappa, dof, scale })
    }

    /// Draws a (mean, covariance) pair: covariance from the inverse-Wishart
    /// part, then mean from a Gaussian around `mean` scaled by `kappa`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let cov = sample_inverse_wishart(&self.scale, self.dof, rng)?;
        let (chol, _) = cholesky_with_jitter(&cov)?;
        let dim = self.dim();
        let noise = DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        let mean = &self.mean + chol.l() * noise / self.kappa.sqrt();
        Ok((mean, cov))
    }
}

/// Mean of each column, as a vector.
fn column_mean(data: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_fn(data.ncols(), |c, _| data.column(c).mean())
}

/// Scatter matrix of rows about the given center.
fn scatter_about(data: &DMatrix<f64>, center: &DVector<f64>) -> DMatrix<f64> {
    let dim = data.ncols();
    let mut scatter = DMatrix::zeros(dim, dim);
    for r in 0..data.nrows() {
        let diff = data.row(r).transpose() - center;
        scatter += &diff * diff.transpose();
    }
    scatter
}

/// Draws from an inverse-Wishart with the given scale and degrees of
/// freedom, via the Bartlett decomposition of the corresponding Wishart.
pub(crate) fn sample_inverse_wishart<R: Rng + ?Sized>(
    scale: &DMatrix<f64>,
    dof: f64,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    let dim = scale.nrows();
    if !(dof > dim as f64 - 1.0) {
        return Err(Error::Argument(format!(
            "inverse-Wishart dof must exceed dim - 1 = {}, got {dof}",
            dim as f64 - 1.0
        )));
    }
    let (scale_chol, _) = cholesky_with_jitter(scale)?;
    let mut bartlett = DMatrix::zeros(dim, dim);
    for i in 0..dim {
        let chi2 = Gamma::new((dof - i as f64) / 2.0, 2.0)
            .map_err(|e| Error::Numeric(format!("Gamma for chi-square: {e}")))?;
        bartlett[(i, i)] = chi2.sample(rng).sqrt().max(f64::MIN_POSITIVE.sqrt());
        for j in 0..i {
            bartlett[(i, j)] = rng.sample::<f64, _>(StandardNormal);
        }
    }
    // With scale = L L^T and Bartlett factor A, the draw is
    // (L^{-T} A A^T L^{-1})^{-1} = K^T K where K = A^{-1} L^T.
    let upper = scale_chol.l().transpose();
    let k = bartlett
        .solve_lower_triangular(&upper)
        .ok_or_else(|| Error::Numeric("Bartlett factor is singular".into()))?;
    Ok(k.transpose() * k)
}

/// Cholesky factorization with an escalating diagonal jitter fallback.
///
/// On failure, adds `1e-8 * trace / dim` to the diagonal and retries,
/// escalating the jitter tenfold up to three times before giving up.
/// Returns the factorization and the jitter that was needed.
pub(crate) fn cholesky_with_jitter(matrix: &DMatrix<f64>) -> Result<(Cholesky<f64, Dyn>, f64)> {
    if let Some(chol) = Cholesky::new(matrix.clone()) {
        return Ok((chol, 0.0));
    }
    let dim = matrix.nrows();
    let base = matrix.trace() / dim as f64;
    let mut jitter = 1e-8 * if base > 0.0 { base } else { 1.0 };
    for _ in 0..3 {
        let mut padded = matrix.clone();
        for d in 0..dim {
            padded[(d, d)] += jitter;
        }
        if let Some(chol) = Cholesky::new(padded) {
            return Ok((chol, jitter));
        }
        jitter *= 10.0;
    }
    Err(Error::Numeric(format!(
        "matrix is not positive definite even with diagonal jitter {:.3e}",
        jitter / 10.0
    )))
}
