use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{fit_weights, LogDensityMatrix, PenaltySpec, WeightFitOptions, WeightInit};
use crate::data::DataMatrix;
use crate::error::{usage, Result};
use crate::fit::CandidatePool;
use crate::mixture::lse;
use crate::rng::stream_rng;

#[derive(Debug, Clone, PartialEq)]
pub struct CvConfig {
    pub folds: usize,
    /// Candidate penalty strengths, strictly increasing.
    pub lambda_grid: Vec<f64>,
    pub seed: u64,
}

impl CvConfig {
    /// Five folds over [`default_lambda_grid`].
    pub fn with_defaults(n: usize, seed: u64) -> Self {
        Self {
            folds: 5,
            lambda_grid: default_lambda_grid(n),
            seed,
        }
    }
}

/// 25 log-spaced values from 0.01 to `4 log n`.
pub fn default_lambda_grid(n: usize) -> Vec<f64> {
    log_grid(0.01, 4.0 * (n.max(2) as f64).ln(), 25)
}

pub(crate) fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvRow {
    pub lambda: f64,
    pub test_loglik: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvOutcome {
    pub lambda: f64,
    pub table: Vec<CvRow>,
    pub warnings: Vec<String>,
}

/// Fold membership: a seeded shuffle split into contiguous blocks, the
/// first `n mod V` folds one observation larger.
pub(crate) fn folds(n: usize, v: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut stream_rng(seed, 0));
    let base = n / v;
    let extra = n % v;
    let mut out = Vec::with_capacity(v);
    let mut start = 0;
    for f in 0..v {
        let len = base + usize::from(f < extra);
        out.push(idx[start..start + len].to_vec());
        start += len;
    }
    out
}

/// Cross-validated penalty strength for the selected models of `pool`.
pub fn lambda_cv(data: &DataMatrix, pool: &CandidatePool, cv: &CvConfig) -> Result<CvOutcome> {
    let density = LogDensityMatrix::from_models(data, pool.selected())?;
    lambda_cv_matrix(&density, &pool.nu(), cv)
}

/// V-fold selection of λ on a fixed log-density matrix. Only the weights are
/// refitted per fold; ties go to the larger λ.
pub fn lambda_cv_matrix(density: &LogDensityMatrix, nu: &[usize], cv: &CvConfig) -> Result<CvOutcome> {
    let n = density.n();
    let m = density.m();
    if cv.lambda_grid.is_empty() {
        return usage("lambda grid is empty");
    }
    if cv.lambda_grid.windows(2).any(|w| !(w[1] > w[0])) || cv.lambda_grid.iter().any(|l| !(*l >= 0.0)) {
        return usage("lambda grid must be non-negative and strictly increasing");
    }
    if cv.folds < 2 || cv.folds > n {
        return usage(format!("need 2 <= folds <= n, got {} folds for n={n}", cv.folds));
    }
    PenaltySpec::new(0.0, nu.to_vec())?.check(m)?;

    let folds = folds(n, cv.folds, cv.seed);
    let mut warnings = Vec::new();
    for (f, fold) in folds.iter().enumerate() {
        if fold.len() < m {
            warnings.push(format!("fold {} has {} observations for {m} models", f + 1, fold.len()));
        }
    }
    let splits: Vec<(LogDensityMatrix, LogDensityMatrix)> = folds
        .iter()
        .map(|test| {
            let mut in_test = vec![false; n];
            test.iter().for_each(|i| in_test[*i] = true);
            let train: Vec<usize> = (0..n).filter(|i| !in_test[*i]).collect();
            (density.select_rows(&train), density.select_rows(test))
        })
        .collect();

    // Each fold walks the grid in order, starting every fit near the
    // previous solution; the objective is concave in α, so the start only
    // affects the iteration count. Mixing in the uniform vector keeps every
    // start away from the simplex boundary, where EM moves slowly.
    let options = WeightFitOptions::default();
    let per_fold: Vec<Result<Vec<f64>>> = splits
        .par_iter()
        .map(|(train, test)| {
            let mut prev: Option<Vec<f64>> = None;
            let mut out = Vec::with_capacity(cv.lambda_grid.len());
            for &lambda in &cv.lambda_grid {
                let penalty = PenaltySpec::new(lambda, nu.to_vec())?;
                let init = match &prev {
                    Some(a) => WeightInit::Given(a.iter().map(|v| 0.9 * v + 0.1 / m as f64).collect()),
                    None => WeightInit::Uniform,
                };
                let fit = fit_weights(train, &penalty, &init, &options)?;
                let log_alpha: Vec<f64> = fit.alpha.iter().map(|a| a.ln()).collect();
                let mut buf = vec![0.0; m];
                let mut total = 0.0;
                for row in test.rows() {
                    for ((b, l), la) in buf.iter_mut().zip(row).zip(&log_alpha) {
                        *b = l + la;
                    }
                    total += lse(&buf);
                }
                out.push(total);
                prev = Some(fit.alpha);
            }
            Ok(out)
        })
        .collect();
    let per_fold = per_fold.into_iter().collect::<Result<Vec<_>>>()?;
    let scores: Vec<Result<f64>> = (0..cv.lambda_grid.len())
        .map(|j| Ok(per_fold.iter().map(|f| f[j]).sum()))
        .collect();

    let mut table = Vec::with_capacity(scores.len());
    for (lambda, score) in cv.lambda_grid.iter().zip(scores) {
        table.push(CvRow {
            lambda: *lambda,
            test_loglik: score?,
        });
    }
    let best = table
        .iter()
        .fold(None::<&CvRow>, |best, row| match best {
            Some(b) if b.test_loglik > row.test_loglik => Some(b),
            _ => Some(row),
        })
        .expect("grid is non-empty");
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(CvOutcome {
        lambda: best.lambda,
        table,
        warnings,
    })
}
