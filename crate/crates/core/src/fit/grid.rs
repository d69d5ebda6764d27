use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{em_fit, FitConfig};
use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::mixture::{CovarianceStructure, GaussianMixture};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CellStatus {
    Fitted { loglik: f64, bic: f64, nu: usize },
    Failed { reason: String },
}

/// Outcome of one `(K, structure)` cell of the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub k: usize,
    pub structure: CovarianceStructure,
    pub status: CellStatus,
}

/// Fitted models ranked by descending BIC.
#[derive(Debug, Clone)]
pub struct CandidatePool {
    models: Vec<GaussianMixture>,
    ensemble_size: usize,
    n: usize,
    cells: Vec<CellReport>,
}

impl CandidatePool {
    /// Ranks `models` (all of which must carry a BIC) and keeps the top
    /// `ensemble_size` for the ensemble. Ties keep input order.
    pub fn new(mut models: Vec<GaussianMixture>, ensemble_size: usize, n: usize) -> Result<Self> {
        if models.iter().any(|m| m.bic().is_none()) {
            return Err(Error::Usage("every pooled model needs a BIC".into()));
        }
        models.sort_by(|a, b| b.bic().partial_cmp(&a.bic()).unwrap_or(std::cmp::Ordering::Equal));
        let ensemble_size = ensemble_size.min(models.len());
        Ok(Self {
            models,
            ensemble_size,
            n,
            cells: Vec::new(),
        })
    }

    pub fn with_cells(mut self, cells: Vec<CellReport>) -> Self {
        self.cells = cells;
        self
    }

    /// Every surviving model, best first.
    pub fn models(&self) -> &[GaussianMixture] {
        &self.models
    }

    /// The `M` models that enter the ensemble.
    pub fn selected(&self) -> &[GaussianMixture] {
        &self.models[..self.ensemble_size]
    }

    pub fn ensemble_size(&self) -> usize {
        self.ensemble_size
    }

    pub fn best(&self) -> Option<&GaussianMixture> {
        self.models.first()
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    /// Sample size the models were fitted on.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn cells(&self) -> &[CellReport] {
        &self.cells
    }

    /// Keeps the first `m` models for the ensemble.
    pub fn with_ensemble_size(mut self, m: usize) -> Self {
        self.ensemble_size = m.max(1).min(self.models.len());
        self
    }

    /// Complexity `ν_m` of each selected model.
    pub fn nu(&self) -> Vec<usize> {
        self.selected().iter().map(|m| m.nu()).collect()
    }
}

/// Fits every `(K, structure)` cell of the grid. Failed cells are reported
/// and dropped; the survivors are ranked by BIC.
pub fn fit_grid(data: &DataMatrix, config: &FitConfig) -> Result<CandidatePool> {
    config.validate()?;
    let cells: Vec<(usize, CovarianceStructure)> = config
        .k_range
        .clone()
        .flat_map(|k| config.structures.iter().map(move |s| (k, *s)))
        .collect();
    let fits: Vec<Result<GaussianMixture>> = cells
        .par_iter()
        .map(|&(k, s)| em_fit(data, k, s, config))
        .collect();

    let mut models = Vec::new();
    let mut reports = Vec::with_capacity(cells.len());
    for ((k, structure), fit) in cells.into_iter().zip(fits) {
        let status = match fit {
            Ok(m) => {
                let status = CellStatus::Fitted {
                    loglik: m.loglik().unwrap_or(f64::NAN),
                    bic: m.bic().unwrap_or(f64::NAN),
                    nu: m.nu(),
                };
                models.push(m);
                status
            }
            Err(e) => CellStatus::Failed {
                reason: e.to_string(),
            },
        };
        reports.push(CellReport { k, structure, status });
    }
    if models.is_empty() {
        return Err(Error::Pipeline("every cell of the model grid failed to fit".into()));
    }
    Ok(CandidatePool::new(models, config.ensemble_size, data.n())?.with_cells(reports))
}

/// Drops models whose BIC is more than `width` below the best.
pub fn occam_window(pool: &CandidatePool, width: f64) -> CandidatePool {
    let Some(best) = pool.best().and_then(|m| m.bic()) else {
        return pool.clone();
    };
    let models: Vec<GaussianMixture> = pool
        .models
        .iter()
        .filter(|m| m.bic().is_some_and(|b| (best - b).abs() <= width))
        .cloned()
        .collect();
    CandidatePool {
        ensemble_size: pool.ensemble_size.min(models.len()),
        models,
        n: pool.n,
        cells: pool.cells.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mixture::GaussianComponent;

    pub(crate) fn with_bic(bic: f64) -> GaussianMixture {
        let c = GaussianComponent::from_row_major(vec![bic], &[1.0]).unwrap();
        GaussianMixture::new(vec![1.0], vec![c], CovarianceStructure::EII)
            .unwrap()
            .with_stats(Some(0.0), Some(bic))
    }

    fn bics(p: &CandidatePool) -> Vec<f64> {
        p.models().iter().map(|m| m.bic().unwrap()).collect()
    }

    #[test]
    fn occam_window_keeps_close_models() {
        let pool = CandidatePool::new(vec![with_bic(-580.0), with_bic(-561.72), with_bic(-562.55)], 30, 150)
            .unwrap();
        assert_eq!(bics(&pool), vec![-561.72, -562.55, -580.0]);
        assert_eq!(bics(&occam_window(&pool, 10.0)), vec![-561.72, -562.55]);
        assert_eq!(bics(&occam_window(&pool, f64::INFINITY)), bics(&pool));
        let one = CandidatePool::new(vec![with_bic(-3.0)], 30, 10).unwrap();
        assert_eq!(bics(&occam_window(&one, 10.0)), vec![-3.0]);
    }

    #[test]
    fn ranking_is_permutation_invariant() {
        let values = [-5.0, -1.0, -3.0, -2.0, -4.0];
        let a = CandidatePool::new(values.iter().map(|b| with_bic(*b)).collect(), 3, 10).unwrap();
        let b = CandidatePool::new(values.iter().rev().map(|b| with_bic(*b)).collect(), 3, 10).unwrap();
        assert_eq!(bics(&a), bics(&b));
        assert_eq!(a.selected().len(), 3);
    }

    #[test]
    fn grid_respects_pool_bound_and_order() {
        let rows: Vec<Vec<f64>> = (0..60)
            .map(|i| {
                let t = i as f64;
                vec![(t * 0.37).sin() + if i % 2 == 0 { 4.0 } else { 0.0 }, (t * 0.91).cos()]
            })
            .collect();
        let data = DataMatrix::from_rows(&rows).unwrap();
        let cfg = FitConfig {
            k_range: 1..=3,
            structures: vec![CovarianceStructure::EII],
            ..FitConfig::default()
        };
        let pool = fit_grid(&data, &cfg).unwrap();
        assert!(pool.len() <= 3);
        assert_eq!(pool.cells().len(), 3);
        let b = bics(&pool);
        assert!(b.windows(2).all(|w| w[0] >= w[1]));
    }
}
