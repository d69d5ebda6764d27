use nalgebra::DMatrix;

use super::{kmeans::kmeans_labels, FitConfig};
use crate::data::DataMatrix;
use crate::error::{usage, Error, Result};
use crate::mixture::{CovarianceStructure, GaussianComponent, GaussianMixture};
use crate::rng::{splitmix64, stream_rng};

/// Result of one EM run: the fitted model plus the observed log-likelihood
/// after every parameter update (the first entry is the initial fit).
#[derive(Debug, Clone)]
pub struct EmRun {
    pub model: GaussianMixture,
    pub trace: Vec<f64>,
    pub converged: bool,
}

impl EmRun {
    pub fn iterations(&self) -> usize {
        self.trace.len().saturating_sub(1)
    }
}

/// Seed of the `(k, structure)` grid cell.
pub fn cell_seed(seed: u64, k: usize, structure: CovarianceStructure) -> u64 {
    seed ^ splitmix64(((k as u64) << 8) | structure.index() as u64)
}

/// Maximum-likelihood fit of a `k`-component mixture with the given
/// covariance structure, best of `config.n_init` k-means++ starts.
pub fn em_fit(
    data: &DataMatrix,
    k: usize,
    structure: CovarianceStructure,
    config: &FitConfig,
) -> Result<GaussianMixture> {
    em_fit_traced(data, k, structure, config).map(|run| run.model)
}

pub fn em_fit_traced(
    data: &DataMatrix,
    k: usize,
    structure: CovarianceStructure,
    config: &FitConfig,
) -> Result<EmRun> {
    let n = data.n();
    if k == 0 {
        return usage("number of components must be positive");
    }
    if n <= k {
        return usage(format!("need more than {k} observations to fit {k} components, got {n}"));
    }
    let seed = cell_seed(config.seed, k, structure);
    let starts = if k == 1 { 1 } else { config.n_init.max(1) };
    let mut best: Option<EmRun> = None;
    let mut last_err = String::new();
    for start in 0..starts {
        let mut rng = stream_rng(seed, start as u64);
        let labels = kmeans_labels(data, k, 10, &mut rng);
        let mut resp = vec![0.0; n * k];
        for (i, l) in labels.iter().enumerate() {
            resp[i * k + l] = 1.0;
        }
        match run_em(data, k, structure, resp, config) {
            Ok(run) => {
                let better = best
                    .as_ref()
                    .is_none_or(|b| run.trace.last() > b.trace.last());
                if better {
                    best = Some(run);
                }
            }
            Err(e) => last_err = e,
        }
    }
    match best {
        Some(mut run) => {
            let ll = *run.trace.last().expect("trace is never empty");
            run.model = run.model.with_fit(ll, n);
            Ok(run)
        }
        None => Err(Error::FitFailure(format!("{structure} with K={k}: {last_err}"))),
    }
}

fn run_em(
    data: &DataMatrix,
    k: usize,
    structure: CovarianceStructure,
    mut resp: Vec<f64>,
    config: &FitConfig,
) -> std::result::Result<EmRun, String> {
    let mut model = m_step(data, &resp, k, structure)?;
    let mut ll = e_step(data, &model, &mut resp)?;
    let mut trace = vec![ll];
    let mut converged = false;
    for _ in 0..config.max_iter {
        model = m_step(data, &resp, k, structure)?;
        let next = e_step(data, &model, &mut resp)?;
        trace.push(next);
        let done = (next - ll).abs() <= config.rel_tol * next.abs();
        ll = next;
        if done {
            converged = true;
            break;
        }
    }
    Ok(EmRun {
        model,
        trace,
        converged,
    })
}

/// Fills `resp` with posterior probabilities and returns the log-likelihood.
fn e_step(data: &DataMatrix, model: &GaussianMixture, resp: &mut [f64]) -> std::result::Result<f64, String> {
    let k = model.k();
    let mut ll = 0.0;
    for (x, row) in data.rows().zip(resp.chunks_exact_mut(k)) {
        let mut max = f64::NEG_INFINITY;
        for ((r, c), lw) in row.iter_mut().zip(model.components()).zip(model.log_weights()) {
            *r = lw + c.lpdf(x);
            max = max.max(*r);
        }
        if !max.is_finite() {
            return Err("log-likelihood is not finite".into());
        }
        let mut sum = 0.0;
        for r in row.iter_mut() {
            *r = (*r - max).exp();
            sum += *r;
        }
        let inv = 1.0 / sum;
        row.iter_mut().for_each(|r| *r *= inv);
        ll += max + sum.ln();
    }
    if ll.is_finite() {
        Ok(ll)
    } else {
        Err("log-likelihood is not finite".into())
    }
}

/// Structure-constrained maximization given soft assignments.
pub(crate) fn m_step(
    data: &DataMatrix,
    resp: &[f64],
    k: usize,
    structure: CovarianceStructure,
) -> std::result::Result<GaussianMixture, String> {
    let n = data.n();
    let d = data.dim();
    let mut nk = vec![0.0; k];
    let mut means = vec![vec![0.0; d]; k];
    for (x, row) in data.rows().zip(resp.chunks_exact(k)) {
        for j in 0..k {
            nk[j] += row[j];
            for (m, v) in means[j].iter_mut().zip(x) {
                *m += row[j] * v;
            }
        }
    }
    let floor = 1.0 / (2.0 * n as f64);
    for j in 0..k {
        if !(nk[j] / n as f64 >= floor) {
            return Err(format!("component {} weight below 1/(2n)", j + 1));
        }
        // A per-component covariance needs more than d effective points;
        // fewer yields a spike on a handful of observations.
        if !structure.is_pooled() && nk[j] < (d + 1) as f64 {
            return Err(format!("component {} has fewer than d+1 effective observations", j + 1));
        }
        means[j].iter_mut().for_each(|m| *m /= nk[j]);
    }

    // scatter matrices, lower triangle row-major
    let mut scatter = vec![vec![0.0; d * d]; k];
    let mut c = vec![0.0; d];
    for (x, row) in data.rows().zip(resp.chunks_exact(k)) {
        for j in 0..k {
            let w = row[j];
            if w == 0.0 {
                continue;
            }
            for (cv, (xv, m)) in c.iter_mut().zip(x.iter().zip(&means[j])) {
                *cv = xv - m;
            }
            let s = &mut scatter[j];
            for a in 0..d {
                let wa = w * c[a];
                for b in 0..=a {
                    s[a * d + b] += wa * c[b];
                }
            }
        }
    }

    let covs: Vec<DMatrix<f64>> = match structure {
        CovarianceStructure::VVV => (0..k)
            .map(|j| symmetric(d, |a, b| scatter[j][a * d + b] / nk[j]))
            .collect(),
        CovarianceStructure::EEE => {
            let pooled = pool(&scatter, d);
            vec![symmetric(d, |a, b| pooled[a * d + b] / n as f64); k]
        }
        CovarianceStructure::VVI => (0..k)
            .map(|j| diagonal(d, |a| scatter[j][a * d + a] / nk[j]))
            .collect(),
        CovarianceStructure::EEI => {
            let pooled = pool(&scatter, d);
            vec![diagonal(d, |a| pooled[a * d + a] / n as f64); k]
        }
        CovarianceStructure::VII => (0..k)
            .map(|j| {
                let tr: f64 = (0..d).map(|a| scatter[j][a * d + a]).sum();
                diagonal(d, |_| tr / (d as f64 * nk[j]))
            })
            .collect(),
        CovarianceStructure::EII => {
            let pooled = pool(&scatter, d);
            let tr: f64 = (0..d).map(|a| pooled[a * d + a]).sum();
            vec![diagonal(d, |_| tr / (d as f64 * n as f64)); k]
        }
    };

    let mut components = Vec::with_capacity(k);
    for (mean, cov) in means.into_iter().zip(covs) {
        components.push(factor_regularized(mean, cov).ok_or("covariance is numerically singular")?);
    }
    let weights: Vec<f64> = nk.iter().map(|v| v / n as f64).collect();
    let total: f64 = weights.iter().sum();
    let weights = weights.into_iter().map(|w| w / total).collect();
    GaussianMixture::new(weights, components, structure).map_err(|e| e.to_string())
}

/// Cholesky factorization, retried once with `1e-8 · trace / d` added to the
/// diagonal.
fn factor_regularized(mean: Vec<f64>, cov: DMatrix<f64>) -> Option<GaussianComponent> {
    if let Some(c) = GaussianComponent::factor(mean.clone(), cov.clone()) {
        return Some(c);
    }
    let d = cov.nrows();
    let ridge = 1e-8 * cov.trace() / d as f64;
    if !(ridge > 0.0) {
        return None;
    }
    let mut reg = cov;
    for i in 0..d {
        reg[(i, i)] += ridge;
    }
    GaussianComponent::factor(mean, reg)
}

fn pool(scatter: &[Vec<f64>], d: usize) -> Vec<f64> {
    let mut out = vec![0.0; d * d];
    for s in scatter {
        for (o, v) in out.iter_mut().zip(s) {
            *o += v;
        }
    }
    out
}

fn symmetric(d: usize, lower: impl Fn(usize, usize) -> f64) -> DMatrix<f64> {
    DMatrix::from_fn(d, d, |a, b| if a >= b { lower(a, b) } else { lower(b, a) })
}

fn diagonal(d: usize, diag: impl Fn(usize) -> f64) -> DMatrix<f64> {
    DMatrix::from_fn(d, d, |a, b| if a == b { diag(a) } else { 0.0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    fn blobs(seed: u64, per: usize, sep: f64) -> (DataMatrix, Vec<usize>) {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..2 * per {
            let c = (i % 2) as f64 * sep;
            let a: f64 = StandardNormal.sample(&mut rng);
            let b: f64 = StandardNormal.sample(&mut rng);
            rows.push(vec![c + a, c + b]);
            labels.push(i % 2);
        }
        (DataMatrix::from_rows(&rows).unwrap(), labels)
    }

    #[test]
    fn single_component_is_sample_mean_and_ml_covariance() {
        let (data, _) = blobs(1, 50, 3.0);
        let fit = em_fit(&data, 1, CovarianceStructure::VVV, &FitConfig::default()).unwrap();
        let mean = data.column_means();
        let n = data.n() as f64;
        let mut cov = [0.0; 4];
        for x in data.rows() {
            for a in 0..2 {
                for b in 0..2 {
                    cov[a * 2 + b] += (x[a] - mean[a]) * (x[b] - mean[b]) / n;
                }
            }
        }
        let c = &fit.components()[0];
        for a in 0..2 {
            assert_relative_eq!(c.mean()[a], mean[a], epsilon = 1e-12);
            for b in 0..2 {
                assert_relative_eq!(c.covariance()[(a, b)], cov[a * 2 + b], epsilon = 1e-12);
            }
        }
        assert_relative_eq!(fit.loglik().unwrap(), fit.loglik_on(&data).unwrap(), epsilon = 1e-9);
    }

    #[test]
    fn loglik_never_decreases() {
        let (data, _) = blobs(2, 100, 2.0);
        for s in CovarianceStructure::ALL {
            let run = em_fit_traced(&data, 3, s, &FitConfig::default()).unwrap();
            for w in run.trace.windows(2) {
                assert!(w[1] >= w[0] - 1e-8, "{s}: {} -> {}", w[0], w[1]);
            }
        }
    }

    #[test]
    fn constrained_structures_obey_their_constraints() {
        let (data, _) = blobs(3, 80, 4.0);
        let cfg = FitConfig::default();
        let eii = em_fit(&data, 2, CovarianceStructure::EII, &cfg).unwrap();
        let (a, b) = (eii.components()[0].covariance(), eii.components()[1].covariance());
        assert_eq!(a, b);
        assert_eq!(a[(0, 1)], 0.0);
        assert_eq!(a[(0, 0)], a[(1, 1)]);
        let vvi = em_fit(&data, 2, CovarianceStructure::VVI, &cfg).unwrap();
        assert_eq!(vvi.components()[1].covariance()[(1, 0)], 0.0);
        let eee = em_fit(&data, 2, CovarianceStructure::EEE, &cfg).unwrap();
        assert_eq!(eee.components()[0].covariance(), eee.components()[1].covariance());
    }

    #[test]
    fn too_few_observations_is_usage_error() {
        let data = DataMatrix::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
        assert!(matches!(
            em_fit(&data, 2, CovarianceStructure::EII, &FitConfig::default()),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn singular_cells_fail_without_panicking() {
        // all observations on a line: VVV components are singular
        let rows: Vec<Vec<f64>> = (0..30).map(|i| vec![i as f64, 2.0 * i as f64]).collect();
        let data = DataMatrix::from_rows(&rows).unwrap();
        assert!(matches!(
            em_fit(&data, 2, CovarianceStructure::VVV, &FitConfig::default()),
            Err(Error::FitFailure(_))
        ));
    }
}
