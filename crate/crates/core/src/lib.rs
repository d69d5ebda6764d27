//! Ensemble model-based clustering.
//!
//! A grid of Gaussian mixtures is fitted by EM and ranked by BIC. The best
//! `M` fitted densities are combined into a convex ensemble whose weights
//! maximize a complexity-penalized log-likelihood, and observations are
//! grouped by the mode of the ensemble density they ascend to under modal EM.
//!
//! The pipeline stages live in separate modules:
//!
//! * [`mixture`]: densities, ensembles and their numerically stable evaluation
//! * [`fit`]: EM fitting of the candidate grid, BIC ranking, MAP labels
//! * [`weights`]: penalized estimation of the ensemble weights, λ selection
//! * [`modal`]: modal EM ascent and the induced partition
//! * [`eval`]: adjusted Rand index and integrated squared error
//! * [`sim`]: generative scenarios and the Monte Carlo harness

pub mod cli;
pub mod data;
pub mod error;
pub mod eval;
pub mod fit;
pub mod io;
pub mod mixture;
pub mod modal;
pub mod rng;
pub mod sim;
pub mod weights;

pub use data::DataMatrix;
pub use error::{Error, Result};
pub use mixture::{
    CovarianceStructure, EnsembleDensity, GaussianComponent, GaussianMixture, LogDensity,
};
