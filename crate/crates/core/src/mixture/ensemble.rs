use super::{lse, CovarianceStructure, GaussianMixture, LogDensity};
use crate::error::{usage, Result};

/// Convex combination `Σ_m α_m f_m(x)` of fitted mixtures.
#[derive(Debug, Clone)]
pub struct EnsembleDensity {
    models: Vec<GaussianMixture>,
    alpha: Vec<f64>,
    log_alpha: Vec<f64>,
}

impl EnsembleDensity {
    pub fn new(models: Vec<GaussianMixture>, alpha: Vec<f64>) -> Result<Self> {
        if models.is_empty() {
            return usage("ensemble needs at least one model");
        }
        if alpha.len() != models.len() {
            return usage(format!("{} weights for {} models", alpha.len(), models.len()));
        }
        let d = models[0].dim();
        if models.iter().any(|m| m.dim() != d) {
            return usage("ensemble models have different dimensions");
        }
        if alpha.iter().any(|a| !(*a > 0.0) || !a.is_finite()) {
            return usage("ensemble weights must be strictly positive");
        }
        let total: f64 = alpha.iter().sum();
        if (total - 1.0).abs() > 1e-10 {
            return usage(format!("ensemble weights sum to {total}, not 1"));
        }
        Ok(Self {
            log_alpha: alpha.iter().map(|a| a.ln()).collect(),
            models,
            alpha,
        })
    }

    /// Ensemble consisting of one model with all the mass.
    pub fn single(model: GaussianMixture) -> Self {
        Self {
            models: vec![model],
            alpha: vec![1.0],
            log_alpha: vec![0.0],
        }
    }

    pub fn models(&self) -> &[GaussianMixture] {
        &self.models
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn dim(&self) -> usize {
        self.models[0].dim()
    }

    pub fn log_density(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return usage(format!(
                "point has dimension {}, ensemble has {}",
                x.len(),
                self.dim()
            ));
        }
        Ok(self.ln_density(x))
    }

    /// Rewrites the ensemble as one mixture whose component `(m, k)` carries
    /// weight `α_m π_mk`.
    pub fn flatten(&self) -> GaussianMixture {
        if self.models.len() == 1 {
            return self.models[0].clone();
        }
        let mut weights = Vec::new();
        let mut components = Vec::new();
        for (model, a) in self.models.iter().zip(&self.alpha) {
            for (c, p) in model.components().iter().zip(model.weights()) {
                weights.push(a * p);
                components.push(c.clone());
            }
        }
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        GaussianMixture::new(weights, components, CovarianceStructure::VVV)
            .expect("flattening preserves mixture invariants")
    }
}

impl LogDensity for EnsembleDensity {
    fn dim(&self) -> usize {
        EnsembleDensity::dim(self)
    }

    fn ln_density(&self, x: &[f64]) -> f64 {
        let terms: Vec<f64> = self
            .models
            .iter()
            .zip(&self.log_alpha)
            .map(|(m, la)| la + m.ln_density(x))
            .collect();
        lse(&terms)
    }
}

/// `log Σ_m α_m f_m(x | Ψ̂_m)`.
pub fn ensemble_log_density(x: &[f64], ens: &EnsembleDensity) -> Result<f64> {
    ens.log_density(x)
}

pub fn flatten_ensemble(ens: &EnsembleDensity) -> GaussianMixture {
    ens.flatten()
}
