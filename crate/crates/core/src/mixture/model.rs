use super::{lse, CovarianceStructure, GaussianComponent, LogDensity};
use crate::data::DataMatrix;
use crate::error::{usage, Result};

/// A finite Gaussian mixture `Σ_k π_k φ(x | μ_k, Σ_k)`.
#[derive(Debug, Clone)]
pub struct GaussianMixture {
    components: Vec<GaussianComponent>,
    weights: Vec<f64>,
    log_weights: Vec<f64>,
    structure: CovarianceStructure,
    nu: usize,
    loglik: Option<f64>,
    bic: Option<f64>,
}

impl GaussianMixture {
    pub fn new(
        weights: Vec<f64>,
        components: Vec<GaussianComponent>,
        structure: CovarianceStructure,
    ) -> Result<Self> {
        if components.is_empty() {
            return usage("mixture needs at least one component");
        }
        if weights.len() != components.len() {
            return usage(format!(
                "{} weights for {} components",
                weights.len(),
                components.len()
            ));
        }
        let d = components[0].dim();
        if components.iter().any(|c| c.dim() != d) {
            return usage("mixture components have different dimensions");
        }
        if weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
            return usage("mixture weights must be strictly positive");
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-10 {
            return usage(format!("mixture weights sum to {total}, not 1"));
        }
        let nu = structure.free_params(d, components.len());
        Ok(Self {
            log_weights: weights.iter().map(|w| w.ln()).collect(),
            components,
            weights,
            structure,
            nu,
            loglik: None,
            bic: None,
        })
    }

    /// Records the maximized log-likelihood on `n` observations and the
    /// corresponding BIC.
    pub fn with_fit(mut self, loglik: f64, n: usize) -> Self {
        self.loglik = Some(loglik);
        self.bic = Some(2.0 * loglik - self.nu as f64 * (n as f64).ln());
        self
    }

    pub(crate) fn with_stats(mut self, loglik: Option<f64>, bic: Option<f64>) -> Self {
        self.loglik = loglik;
        self.bic = bic;
        self
    }

    pub fn k(&self) -> usize {
        self.components.len()
    }

    pub fn dim(&self) -> usize {
        self.components[0].dim()
    }

    pub fn components(&self) -> &[GaussianComponent] {
        &self.components
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn structure(&self) -> CovarianceStructure {
        self.structure
    }

    /// Number of free parameters.
    pub fn nu(&self) -> usize {
        self.nu
    }

    pub fn loglik(&self) -> Option<f64> {
        self.loglik
    }

    pub fn bic(&self) -> Option<f64> {
        self.bic
    }

    pub fn log_density(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return usage(format!(
                "point has dimension {}, mixture has {}",
                x.len(),
                self.dim()
            ));
        }
        Ok(self.ln_density(x))
    }

    /// Writes `log π_k + log φ_k(x)` into `out` and returns their log-sum.
    pub(crate) fn joint_log(&self, x: &[f64], out: &mut [f64]) -> f64 {
        for ((o, c), lw) in out.iter_mut().zip(&self.components).zip(&self.log_weights) {
            *o = lw + c.lpdf(x);
        }
        lse(out)
    }

    /// Log-likelihood `Σ_i log f(x_i)`.
    pub fn loglik_on(&self, data: &DataMatrix) -> Result<f64> {
        if data.dim() != self.dim() {
            return usage("data and mixture dimensions differ");
        }
        Ok(data.rows().map(|x| self.ln_density(x)).sum())
    }

    /// Posterior component probabilities at `x`.
    pub fn responsibilities(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return usage("point and mixture dimensions differ");
        }
        let mut buf = vec![0.0; self.k()];
        let total = self.joint_log(x, &mut buf);
        Ok(buf.into_iter().map(|v| (v - total).exp()).collect())
    }
}

impl LogDensity for GaussianMixture {
    fn dim(&self) -> usize {
        GaussianMixture::dim(self)
    }

    fn ln_density(&self, x: &[f64]) -> f64 {
        let mut buf = [0.0; 32];
        if self.k() <= buf.len() {
            self.joint_log(x, &mut buf[..self.k()])
        } else {
            let mut buf = vec![0.0; self.k()];
            self.joint_log(x, &mut buf)
        }
    }
}

/// `log Σ_k π_k φ_k(x | θ_k)`.
pub fn mixture_log_density(x: &[f64], model: &GaussianMixture) -> Result<f64> {
    model.log_density(x)
}
