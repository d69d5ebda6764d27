//! Gaussian mixture densities and their convex ensembles.
//!
//! Every density in this module is evaluated in the log domain; sums over
//! components go through [`log_sum_exp`] so that ensembles of many models at
//! large `n` never underflow.

mod component;
mod ensemble;
mod model;
mod record;
mod structure;

pub use component::{gaussian_log_density, GaussianComponent};
pub use ensemble::{ensemble_log_density, flatten_ensemble, EnsembleDensity};
pub use model::{mixture_log_density, GaussianMixture};
pub use record::MixtureRecord;
pub use structure::CovarianceStructure;

use crate::error::{usage, Result};

/// Anything that can be evaluated as a log density on `R^d`.
pub trait LogDensity: Sync {
    fn dim(&self) -> usize;

    /// Log density at `x`. `x.len()` must equal [`LogDensity::dim`].
    fn ln_density(&self, x: &[f64]) -> f64;
}

/// `log Σ exp(v_i)` computed without overflow or underflow.
pub fn log_sum_exp(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return usage("log_sum_exp of an empty vector");
    }
    Ok(lse(values))
}

pub(crate) fn lse(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

pub(crate) const LN_2PI: f64 = 1.837_877_066_409_345_5;
