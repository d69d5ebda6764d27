//! Ensemble weights by penalized maximum likelihood.
//!
//! The fitted densities `f_m` are fixed, so everything here works on the
//! `n × M` matrix of `log f_m(x_i)` computed once up front.

mod cv;
mod fit;
mod mstep;

pub use cv::{default_lambda_grid, lambda_cv, lambda_cv_matrix, CvConfig, CvOutcome, CvRow};
pub use fit::{fit_weights, WeightFit, WeightFitOptions, WeightInit, DROP_THRESHOLD};
pub use mstep::{m_step, q_penalized, MStep};

use rayon::prelude::*;

use crate::data::DataMatrix;
use crate::error::{usage, Result};
use crate::mixture::{lse, GaussianMixture, LogDensity};

/// Smallest weight any model keeps, so that `log α_m` stays finite.
pub const ALPHA_FLOOR: f64 = 1e-12;

/// Row-major `n × M` matrix of `log f_m(x_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogDensityMatrix {
    values: Vec<f64>,
    n: usize,
    m: usize,
}

impl LogDensityMatrix {
    pub fn new(values: Vec<f64>, n: usize, m: usize) -> Result<Self> {
        if n == 0 || m == 0 {
            return usage("log-density matrix must be non-empty");
        }
        if values.len() != n * m {
            return usage(format!("matrix buffer has {} values, expected {n}×{m}", values.len()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return usage("log-density matrix has non-finite entries");
        }
        Ok(Self { values, n, m })
    }

    /// Evaluates every model at every observation.
    pub fn from_models(data: &DataMatrix, models: &[GaussianMixture]) -> Result<Self> {
        if models.is_empty() {
            return usage("no models to evaluate");
        }
        if models.iter().any(|m| m.dim() != data.dim()) {
            return usage(format!("models and data (d={}) differ in dimension", data.dim()));
        }
        let m = models.len();
        let mut values = vec![0.0; data.n() * m];
        values
            .par_chunks_mut(m)
            .enumerate()
            .for_each(|(i, row)| {
                let x = data.row(i);
                for (v, model) in row.iter_mut().zip(models) {
                    *v = model.ln_density(x);
                }
            });
        Self::new(values, data.n(), m)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.m..(i + 1) * self.m]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.m)
    }

    pub fn select_rows(&self, idx: &[usize]) -> LogDensityMatrix {
        let mut values = Vec::with_capacity(idx.len() * self.m);
        for &i in idx {
            values.extend_from_slice(self.row(i));
        }
        LogDensityMatrix {
            values,
            n: idx.len(),
            m: self.m,
        }
    }
}

/// Penalty `λ Σ_m α_m ν_m`.
#[derive(Debug, Clone, PartialEq)]
pub struct PenaltySpec {
    pub lambda: f64,
    pub nu: Vec<usize>,
}

impl PenaltySpec {
    pub fn new(lambda: f64, nu: Vec<usize>) -> Result<Self> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return usage(format!("lambda must be finite and non-negative, got {lambda}"));
        }
        if nu.is_empty() || nu.contains(&0) {
            return usage("every complexity ν_m must be at least 1");
        }
        Ok(Self { lambda, nu })
    }

    /// `λ g(α, ν)`.
    pub fn value(&self, alpha: &[f64]) -> f64 {
        self.lambda * alpha.iter().zip(&self.nu).map(|(a, v)| a * *v as f64).sum::<f64>()
    }

    pub(crate) fn check(&self, m: usize) -> Result<()> {
        if self.nu.len() != m {
            return usage(format!("penalty has {} complexities for {m} models", self.nu.len()));
        }
        Ok(())
    }
}

/// AIC-type penalty strength.
pub fn lambda_aic() -> f64 {
    1.0
}

/// BIC-type penalty strength `log(n)/2`.
pub fn lambda_bic(n: usize) -> f64 {
    (n.max(1) as f64).ln() / 2.0
}

fn check_alpha(alpha: &[f64], m: usize) -> Result<()> {
    if alpha.len() != m {
        return usage(format!("{} weights for {m} models", alpha.len()));
    }
    if alpha.iter().any(|a| !(*a > 0.0)) {
        return usage("weights must be strictly positive");
    }
    let total: f64 = alpha.iter().sum();
    if (total - 1.0).abs() > 1e-10 {
        return usage(format!("weights sum to {total}, not 1"));
    }
    Ok(())
}

pub(crate) fn loglik_unchecked(alpha: &[f64], density: &LogDensityMatrix) -> f64 {
    let log_alpha: Vec<f64> = alpha.iter().map(|a| a.ln()).collect();
    let mut buf = vec![0.0; density.m()];
    density
        .rows()
        .map(|row| {
            for ((b, l), la) in buf.iter_mut().zip(row).zip(&log_alpha) {
                *b = l + la;
            }
            lse(&buf)
        })
        .sum()
}

/// `Σ_i log Σ_m α_m f_m(x_i)`.
pub fn loglik_alpha(alpha: &[f64], density: &LogDensityMatrix) -> Result<f64> {
    check_alpha(alpha, density.m())?;
    Ok(loglik_unchecked(alpha, density))
}

/// `ℓ(α) − λ Σ_m α_m ν_m`.
pub fn penalized_loglik(alpha: &[f64], density: &LogDensityMatrix, penalty: &PenaltySpec) -> Result<f64> {
    penalty.check(density.m())?;
    Ok(loglik_alpha(alpha, density)? - penalty.value(alpha))
}

/// Row-major `n × M` posterior model probabilities `τ_mi`.
#[derive(Debug, Clone, PartialEq)]
pub struct Responsibilities {
    values: Vec<f64>,
    n: usize,
    m: usize,
}

impl Responsibilities {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.m..(i + 1) * self.m]
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Column sums `Σ_i τ_mi`.
    pub fn totals(&self) -> Vec<f64> {
        let mut t = vec![0.0; self.m];
        for row in self.values.chunks_exact(self.m) {
            for (a, v) in t.iter_mut().zip(row) {
                *a += v;
            }
        }
        t
    }
}

/// Posterior probability of each model given each observation.
pub fn e_step(alpha_prev: &[f64], density: &LogDensityMatrix) -> Result<Responsibilities> {
    check_alpha(alpha_prev, density.m())?;
    Ok(e_step_unchecked(alpha_prev, density))
}

pub(crate) fn e_step_unchecked(alpha: &[f64], density: &LogDensityMatrix) -> Responsibilities {
    let m = density.m();
    let log_alpha: Vec<f64> = alpha.iter().map(|a| a.ln()).collect();
    let mut values = vec![0.0; density.n() * m];
    for (out, row) in values.chunks_exact_mut(m).zip(density.rows()) {
        for ((o, l), la) in out.iter_mut().zip(row).zip(&log_alpha) {
            *o = l + la;
        }
        let total = lse(out);
        out.iter_mut().for_each(|o| *o = (*o - total).exp());
    }
    Responsibilities {
        values,
        n: density.n(),
        m,
    }
}
