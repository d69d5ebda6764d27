use nalgebra::DMatrix;

use super::LN_2PI;
use crate::error::{usage, Result};

/// A multivariate normal component with its Cholesky factorization cached.
#[derive(Debug, Clone)]
pub struct GaussianComponent {
    mean: Vec<f64>,
    cov: DMatrix<f64>,
    /// Row-major lower-triangular inverse of the Cholesky factor.
    inv_chol: Vec<f64>,
    /// Row-major precision matrix.
    precision: Vec<f64>,
    log_det: f64,
}

impl GaussianComponent {
    /// Builds a component, rejecting asymmetric or non positive-definite
    /// covariances.
    pub fn new(mean: Vec<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let d = mean.len();
        if d == 0 {
            return usage("component mean is empty");
        }
        if cov.nrows() != d || cov.ncols() != d {
            return usage(format!(
                "covariance is {}×{}, mean has length {d}",
                cov.nrows(),
                cov.ncols()
            ));
        }
        if mean.iter().chain(cov.iter()).any(|v| !v.is_finite()) {
            return usage("component parameters must be finite");
        }
        let scale = cov.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for i in 0..d {
            for j in 0..i {
                if (cov[(i, j)] - cov[(j, i)]).abs() > 1e-12 * scale {
                    return usage(format!("covariance is not symmetric at ({i}, {j})"));
                }
            }
        }
        match Self::factor(mean, cov) {
            Some(c) => Ok(c),
            None => usage("covariance is not positive definite"),
        }
    }

    /// Builds from a row-major covariance buffer.
    pub fn from_row_major(mean: Vec<f64>, cov: &[f64]) -> Result<Self> {
        let d = mean.len();
        if cov.len() != d * d {
            return usage(format!("covariance buffer has {} values, expected {}", cov.len(), d * d));
        }
        Self::new(mean, DMatrix::from_row_slice(d, d, cov))
    }

    /// Factorizes without validation. Returns `None` when the Cholesky
    /// decomposition fails or the factor is numerically singular.
    pub(crate) fn factor(mean: Vec<f64>, cov: DMatrix<f64>) -> Option<Self> {
        let d = mean.len();
        let chol = cov.clone().cholesky()?;
        let l = chol.l();
        let diag: Vec<f64> = (0..d).map(|i| l[(i, i)]).collect();
        let (lo, hi) = diag
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        if !(lo > 0.0) || (lo / hi).powi(2) < f64::EPSILON {
            return None;
        }
        let inv = l.solve_lower_triangular(&DMatrix::identity(d, d))?;
        let mut inv_chol = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..=i {
                inv_chol[i * d + j] = inv[(i, j)];
            }
        }
        let mut precision = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                let lo = i.max(j);
                precision[i * d + j] = (lo..d).map(|k| inv_chol[k * d + i] * inv_chol[k * d + j]).sum();
            }
        }
        let log_det = 2.0 * diag.iter().map(|v| v.ln()).sum::<f64>();
        Some(Self {
            mean,
            cov,
            inv_chol,
            precision,
            log_det,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.cov
    }

    /// Inverse covariance, row-major.
    pub fn precision(&self) -> &[f64] {
        &self.precision
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    pub fn log_density(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return usage(format!(
                "point has dimension {}, component has {}",
                x.len(),
                self.dim()
            ));
        }
        Ok(self.lpdf(x))
    }

    /// Squared Mahalanobis distance of `x` from the mean.
    pub(crate) fn mahalanobis(&self, x: &[f64]) -> f64 {
        let d = self.mean.len();
        let mut q = 0.0;
        for i in 0..d {
            let row = &self.inv_chol[i * d..i * d + i + 1];
            let z: f64 = row
                .iter()
                .zip(x.iter().zip(&self.mean))
                .map(|(l, (xv, m))| l * (xv - m))
                .sum();
            q += z * z;
        }
        q
    }

    pub(crate) fn lpdf(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim());
        -0.5 * (self.dim() as f64 * LN_2PI + self.log_det + self.mahalanobis(x))
    }
}

/// `log φ(x | μ, Σ)`.
pub fn gaussian_log_density(x: &[f64], comp: &GaussianComponent) -> Result<f64> {
    comp.log_density(x)
}
