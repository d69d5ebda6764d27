//! Candidate model grid: EM fitting, BIC ranking and MAP classification.

mod em;
mod grid;
mod kmeans;

use std::ops::RangeInclusive;

pub use em::{cell_seed, em_fit, em_fit_traced, EmRun};
pub use grid::{fit_grid, occam_window, CandidatePool, CellReport, CellStatus};

use crate::data::DataMatrix;
use crate::error::{usage, Result};
use crate::mixture::{CovarianceStructure, GaussianMixture, LogDensity};
use crate::modal::{Mode, Partition};

#[derive(Debug, Clone)]
pub struct FitConfig {
    pub k_range: RangeInclusive<usize>,
    pub structures: Vec<CovarianceStructure>,
    pub max_iter: usize,
    /// Relative log-likelihood change that stops EM.
    pub rel_tol: f64,
    pub n_init: usize,
    pub seed: u64,
    /// Number of top-ranked models retained for the ensemble.
    pub ensemble_size: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            k_range: 1..=9,
            structures: CovarianceStructure::ALL.to_vec(),
            max_iter: 500,
            rel_tol: 1e-8,
            n_init: 5,
            seed: 0,
            ensemble_size: 30,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_range.is_empty() || *self.k_range.start() == 0 {
            return usage("k range must be non-empty and start at 1 or more");
        }
        if self.structures.is_empty() {
            return usage("at least one covariance structure is required");
        }
        if !(self.rel_tol > 0.0) {
            return usage("rel_tol must be positive");
        }
        if self.max_iter == 0 || self.n_init == 0 || self.ensemble_size == 0 {
            return usage("max_iter, n_init and ensemble_size must be positive");
        }
        Ok(())
    }
}

/// `2·loglik − ν·log n`; larger is better.
pub fn bic_value(loglik: f64, nu: usize, n: f64) -> f64 {
    2.0 * loglik - nu as f64 * n.ln()
}

/// BIC of a fitted model on `n` observations.
pub fn bic(model: &GaussianMixture, n: usize) -> Result<f64> {
    match model.loglik() {
        Some(ll) => Ok(bic_value(ll, model.nu(), n as f64)),
        None => usage("model has no recorded log-likelihood"),
    }
}

/// Assigns each observation to its most probable component. Labels are
/// `1..=K` in component order; ties go to the lower index.
pub fn map_classify(data: &DataMatrix, model: &GaussianMixture) -> Result<Partition> {
    if data.dim() != model.dim() {
        return usage("data and model dimensions differ");
    }
    let k = model.k();
    let mut buf = vec![0.0; k];
    let mut sizes = vec![0usize; k];
    let labels: Vec<usize> = data
        .rows()
        .map(|x| {
            model.joint_log(x, &mut buf);
            let mut best = 0;
            for j in 1..k {
                if buf[j] > buf[best] {
                    best = j;
                }
            }
            sizes[best] += 1;
            best + 1
        })
        .collect();
    let modes = model
        .components()
        .iter()
        .zip(sizes)
        .map(|(c, basin_size)| Mode {
            location: c.mean().to_vec(),
            log_density: model.ln_density(c.mean()),
            basin_size,
        })
        .collect();
    Ok(Partition {
        labels,
        modes,
        method_tag: format!("map:{}:K={}", model.structure(), k),
        merge_tol: None,
        warnings: Vec::new(),
    })
}
