use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::scenario::{ScenarioId, ScenarioSpec};
use crate::data::DataMatrix;
use crate::error::{usage, Error, Result};
use crate::eval::{adjusted_rand_index, ise, IseGrid, ResultRow};
use crate::fit::{fit_grid, map_classify, CandidatePool, FitConfig};
use crate::mixture::EnsembleDensity;
use crate::modal::{MemOptions, ModalClustering, Partition};
use crate::rng::derive_seed;
use crate::weights::{
    fit_weights, lambda_aic, lambda_bic, lambda_cv_matrix, CvConfig, LogDensityMatrix, PenaltySpec,
    WeightFitOptions, WeightInit,
};

/// Competing clustering procedures of the simulation study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Method {
    /// MAP classification under the BIC-best model.
    SingleBest,
    /// Modal EM on the BIC-best model alone.
    SingleBestModal,
    Aic,
    Bic,
    Cv,
}

impl Method {
    pub const ALL: [Method; 5] = [Self::SingleBest, Self::SingleBestModal, Self::Aic, Self::Bic, Self::Cv];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::SingleBest => "SB",
            Self::SingleBestModal => "SB-NP",
            Self::Aic => "AIC",
            Self::Bic => "BIC",
            Self::Cv => "CV",
        }
    }

    pub fn is_ensemble(self) -> bool {
        matches!(self, Self::Aic | Self::Bic | Self::Cv)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_uppercase();
        let key = key.strip_prefix("LAMBDA_").unwrap_or(&key);
        Self::ALL
            .into_iter()
            .find(|m| m.as_str() == key)
            .ok_or_else(|| Error::Parse(format!("unknown method '{s}' (expected SB, SB-NP, AIC, BIC or CV)")))
    }
}

impl TryFrom<String> for Method {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Method> for String {
    fn from(m: Method) -> String {
        m.as_str().to_string()
    }
}

/// Monte Carlo design, read from a TOML plan file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentPlan {
    pub scenarios: Vec<ScenarioId>,
    #[serde(rename = "B", alias = "replicates")]
    pub replicates: usize,
    #[serde(rename = "n", alias = "sizes")]
    pub sizes: Vec<usize>,
    pub methods: Vec<Method>,
    pub seed: u64,
    pub k_max: usize,
    /// Number of top-BIC models combined by the ensemble methods.
    pub ensemble_size: usize,
    pub cv_folds: usize,
    pub ise_resolution: usize,
    pub results: Option<PathBuf>,
    pub summary: Option<PathBuf>,
}

impl Default for ExperimentPlan {
    fn default() -> Self {
        Self {
            scenarios: ScenarioId::ALL.to_vec(),
            replicates: 200,
            sizes: vec![500, 5000],
            methods: Method::ALL.to_vec(),
            seed: 1,
            k_max: 9,
            ensemble_size: 30,
            cv_folds: 5,
            ise_resolution: 400,
            results: None,
            summary: None,
        }
    }
}

impl ExperimentPlan {
    pub fn from_toml(text: &str) -> Result<Self> {
        let plan: Self = toml::from_str(text).map_err(|e| Error::Parse(format!("plan file: {e}")))?;
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return usage("plan needs B >= 1");
        }
        if self.sizes.is_empty() || self.sizes.iter().any(|&n| n < 50) {
            return usage("plan sample sizes must be non-empty and at least 50");
        }
        if self.scenarios.is_empty() || self.methods.is_empty() {
            return usage("plan needs at least one scenario and one method");
        }
        if self.k_max == 0 || self.ensemble_size == 0 || self.cv_folds < 2 || self.ise_resolution < 2 {
            return usage("plan needs k_max >= 1, ensemble_size >= 1, cv_folds >= 2, ise_resolution >= 2");
        }
        Ok(())
    }

    pub fn fit_config(&self, seed: u64) -> FitConfig {
        FitConfig {
            k_range: 1..=self.k_max,
            seed,
            ensemble_size: self.ensemble_size,
            ..FitConfig::default()
        }
    }
}

/// Outcome of one method on one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodOutcome {
    pub partition: Partition,
    pub ise: Option<f64>,
    pub lambda: Option<f64>,
}

/// Everything one replicate needs that is shared across methods.
pub struct ReplicateContext<'a> {
    pub data: &'a DataMatrix,
    pub pool: &'a CandidatePool,
    pub truth: Option<(&'a ScenarioSpec, &'a IseGrid)>,
    pub cv_folds: usize,
    pub seed: u64,
}

impl ReplicateContext<'_> {
    fn ise_of(&self, est: &crate::mixture::GaussianMixture) -> Result<Option<f64>> {
        self.truth.map(|(spec, grid)| ise(est, spec, grid)).transpose()
    }

    /// Runs one method; `density` caches the selected models' log-densities.
    pub fn run(&self, method: Method, density: &mut Option<LogDensityMatrix>) -> Result<MethodOutcome> {
        let best = self.pool.best().ok_or_else(|| Error::Pipeline("empty pool".into()))?;
        let opts = MemOptions::default();
        match method {
            Method::SingleBest => Ok(MethodOutcome {
                partition: map_classify(self.data, best)?,
                ise: self.ise_of(best)?,
                lambda: None,
            }),
            Method::SingleBestModal => Ok(MethodOutcome {
                partition: ModalClustering::fit_mixture(self.data, best.clone(), None, opts)?.into_partition(),
                ise: self.ise_of(best)?,
                lambda: None,
            }),
            Method::Aic | Method::Bic | Method::Cv => {
                if density.is_none() {
                    *density = Some(LogDensityMatrix::from_models(self.data, self.pool.selected())?);
                }
                let density = density.as_ref().expect("filled above");
                let nu = self.pool.nu();
                let lambda = match method {
                    Method::Aic => lambda_aic(),
                    Method::Bic => lambda_bic(self.data.n()),
                    _ => {
                        let cv = CvConfig {
                            folds: self.cv_folds,
                            ..CvConfig::with_defaults(self.data.n(), self.seed)
                        };
                        lambda_cv_matrix(density, &nu, &cv)?.lambda
                    }
                };
                let penalty = PenaltySpec::new(lambda, nu)?;
                let fit = fit_weights(density, &penalty, &WeightInit::Uniform, &WeightFitOptions::default())?;
                let ens = EnsembleDensity::new(self.pool.selected().to_vec(), fit.alpha)?;
                let flat = ens.flatten();
                let ise = self.ise_of(&flat)?;
                let mut partition = ModalClustering::fit_mixture(self.data, flat, None, opts)?.into_partition();
                partition.method_tag = format!("ensemble:{method}");
                Ok(MethodOutcome {
                    partition,
                    ise,
                    lambda: Some(lambda),
                })
            }
        }
    }
}

fn replicate_rows(
    plan: &ExperimentPlan,
    spec: &ScenarioSpec,
    grid: &IseGrid,
    n: usize,
    replicate: usize,
) -> Vec<ResultRow> {
    let seed = derive_seed(plan.seed, &[spec.id as u64, n as u64, replicate as u64]);
    let (data, truth) = spec.sample(n, seed);
    let pool = fit_grid(&data, &plan.fit_config(derive_seed(seed, &[1])));
    let mut density = None;
    plan.methods
        .iter()
        .map(|&method| {
            let outcome = pool.as_ref().map_err(|e| Error::Pipeline(e.to_string())).and_then(|pool| {
                let ctx = ReplicateContext {
                    data: &data,
                    pool,
                    truth: Some((spec, grid)),
                    cv_folds: plan.cv_folds,
                    seed: derive_seed(seed, &[2]),
                };
                let out = ctx.run(method, &mut density)?;
                let ari = adjusted_rand_index(&out.partition.labels, &truth)?;
                Ok((out, ari))
            });
            let mut row = ResultRow {
                scenario: spec.id.to_string(),
                n,
                method: method.to_string(),
                replicate,
                ise: None,
                ari: None,
                k_hat: None,
                lambda: None,
                seed,
            };
            match outcome {
                Ok((out, ari)) => {
                    row.ise = out.ise;
                    row.ari = Some(ari);
                    row.k_hat = Some(out.partition.k_hat());
                    row.lambda = out.lambda;
                }
                Err(e) => log::warn!("{} n={n} rep={replicate} {method}: {e}", spec.id),
            }
            row
        })
        .collect()
}

/// Runs every (scenario, n, replicate) job of the plan. Replicates run in
/// parallel with pre-derived seeds; rows come back in plan order, so the
/// table does not depend on scheduling.
pub fn run_experiment(plan: &ExperimentPlan) -> Result<Vec<ResultRow>> {
    plan.validate()?;
    let specs: Vec<(ScenarioSpec, IseGrid)> = plan
        .scenarios
        .iter()
        .map(|&id| {
            let spec = ScenarioSpec::new(id);
            let grid = spec.ise_grid(plan.ise_resolution)?;
            Ok((spec, grid))
        })
        .collect::<Result<_>>()?;
    let jobs: Vec<(usize, usize, usize)> = (0..specs.len())
        .flat_map(|s| {
            plan.sizes
                .iter()
                .flat_map(move |&n| (0..plan.replicates).map(move |r| (s, n, r)))
        })
        .collect();
    let rows: Vec<Vec<ResultRow>> = jobs
        .par_iter()
        .map(|&(s, n, r)| replicate_rows(plan, &specs[s].0, &specs[s].1, n, r))
        .collect();
    Ok(rows.into_iter().flatten().collect())
}
