use serde::{Deserialize, Serialize};

use super::{CovarianceStructure, GaussianComponent, GaussianMixture};
use crate::error::{usage, Result};

/// Serialized form of a [`GaussianMixture`]. Covariances are full row-major
/// matrices, symmetric entries included.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureRecord {
    pub d: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub structure: CovarianceStructure,
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub covariances: Vec<Vec<Vec<f64>>>,
    pub nu: usize,
    pub loglik: Option<f64>,
    pub bic: Option<f64>,
}

impl From<&GaussianMixture> for MixtureRecord {
    fn from(m: &GaussianMixture) -> Self {
        let d = m.dim();
        Self {
            d,
            k: m.k(),
            structure: m.structure(),
            weights: m.weights().to_vec(),
            means: m.components().iter().map(|c| c.mean().to_vec()).collect(),
            covariances: m
                .components()
                .iter()
                .map(|c| {
                    let s = c.covariance();
                    (0..d).map(|i| (0..d).map(|j| s[(i, j)]).collect()).collect()
                })
                .collect(),
            nu: m.nu(),
            loglik: m.loglik(),
            bic: m.bic(),
        }
    }
}

impl TryFrom<MixtureRecord> for GaussianMixture {
    type Error = crate::error::Error;

    fn try_from(r: MixtureRecord) -> Result<Self> {
        if r.means.len() != r.k || r.covariances.len() != r.k || r.weights.len() != r.k {
            return usage(format!("model record declares K={} but lists other lengths", r.k));
        }
        let mut components = Vec::with_capacity(r.k);
        for (mean, cov) in r.means.into_iter().zip(r.covariances) {
            if mean.len() != r.d || cov.len() != r.d || cov.iter().any(|row| row.len() != r.d) {
                return usage(format!("model record component does not have dimension {}", r.d));
            }
            let flat: Vec<f64> = cov.into_iter().flatten().collect();
            components.push(GaussianComponent::from_row_major(mean, &flat)?);
        }
        let model = GaussianMixture::new(r.weights, components, r.structure)?;
        if model.nu() != r.nu {
            return usage(format!(
                "model record has nu={} but {} with K={} in d={} has {}",
                r.nu,
                r.structure,
                r.k,
                r.d,
                model.nu()
            ));
        }
        Ok(model.with_stats(r.loglik, r.bic))
    }
}
