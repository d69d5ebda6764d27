//! Modal EM on a Gaussian mixture and the partition it induces.
//!
//! Ascent runs on the component-level mixture obtained by flattening the
//! ensemble. For Gaussian components the maximization step has the closed
//! form `x ← (Σ_j p_j Σ_j⁻¹)⁻¹ Σ_j p_j Σ_j⁻¹ μ_j`, so every iteration is one
//! responsibility evaluation and one small linear solve.

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::error::{usage, Error, Result};
use crate::mixture::{lse, EnsembleDensity, GaussianMixture};
use crate::rng::{derive_seed, stream_rng};

/// Gradient norm above which a converged endpoint is re-ascended from a
/// perturbed start.
pub const GRADIENT_TOL: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    pub location: Vec<f64>,
    pub log_density: f64,
    pub basin_size: usize,
}

/// Cluster labels (`1..=K̂`) with the mode each label stands for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    pub labels: Vec<usize>,
    pub modes: Vec<Mode>,
    pub method_tag: String,
    pub merge_tol: Option<f64>,
    pub warnings: Vec<String>,
}

impl Partition {
    pub fn k_hat(&self) -> usize {
        self.modes.iter().filter(|m| m.basin_size > 0).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MemOptions {
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl Default for MemOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            max_iter: 10_000,
        }
    }
}

/// Endpoint of one modal EM path.
#[derive(Debug, Clone, PartialEq)]
pub struct Ascent {
    pub point: Vec<f64>,
    pub log_density: f64,
    pub iterations: usize,
    pub converged: bool,
}

struct Term {
    log_weight: f64,
    precision: Vec<f64>,
    precision_mean: Vec<f64>,
}

/// Modal EM engine over a fixed Gaussian mixture.
pub struct ModalEm {
    mixture: GaussianMixture,
    terms: Vec<Term>,
}

/// Quantities of one responsibility evaluation at `x`.
struct Local {
    log_density: f64,
    /// `Σ_j p_j Σ_j⁻¹`, row-major
    a: Vec<f64>,
    /// `Σ_j p_j Σ_j⁻¹ μ_j`
    b: Vec<f64>,
    p: Vec<f64>,
}

impl ModalEm {
    pub fn new(mixture: GaussianMixture) -> Self {
        let d = mixture.dim();
        let terms = mixture
            .components()
            .iter()
            .zip(mixture.log_weights())
            .map(|(c, lw)| {
                let p = c.precision().to_vec();
                let pm = (0..d)
                    .map(|i| (0..d).map(|j| p[i * d + j] * c.mean()[j]).sum())
                    .collect();
                Term {
                    log_weight: *lw,
                    precision: p,
                    precision_mean: pm,
                }
            })
            .collect();
        Self { mixture, terms }
    }

    pub fn from_ensemble(ens: &EnsembleDensity) -> Self {
        Self::new(ens.flatten())
    }

    pub fn mixture(&self) -> &GaussianMixture {
        &self.mixture
    }

    pub fn dim(&self) -> usize {
        self.mixture.dim()
    }

    fn local(&self, x: &[f64]) -> Local {
        let d = self.dim();
        let mut p: Vec<f64> = self
            .mixture
            .components()
            .iter()
            .zip(&self.terms)
            .map(|(c, t)| t.log_weight + c.lpdf(x))
            .collect();
        let log_density = lse(&p);
        p.iter_mut().for_each(|v| *v = (*v - log_density).exp());
        let mut a = vec![0.0; d * d];
        let mut b = vec![0.0; d];
        for (pj, t) in p.iter().zip(&self.terms) {
            for (av, pv) in a.iter_mut().zip(&t.precision) {
                *av += pj * pv;
            }
            for (bv, mv) in b.iter_mut().zip(&t.precision_mean) {
                *bv += pj * mv;
            }
        }
        Local { log_density, a, b, p }
    }

    fn solve(&self, local: &Local) -> Option<Vec<f64>> {
        let d = self.dim();
        let a = DMatrix::from_row_slice(d, d, &local.a);
        let chol = a.cholesky()?;
        let x = chol.solve(&DVector::from_column_slice(&local.b));
        Some(x.iter().copied().collect())
    }

    /// One modal EM update from `x`, with `log f(x)`.
    pub fn step(&self, x: &[f64]) -> (Vec<f64>, f64) {
        let local = self.local(x);
        let next = self.solve(&local).unwrap_or_else(|| x.to_vec());
        (next, local.log_density)
    }

    pub fn log_density(&self, x: &[f64]) -> f64 {
        let mut buf = vec![0.0; self.mixture.k()];
        self.mixture.joint_log(x, &mut buf)
    }

    /// Analytic gradient of `log f` at `x`.
    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim();
        let local = self.local(x);
        (0..d)
            .map(|i| local.b[i] - (0..d).map(|j| local.a[i * d + j] * x[j]).sum::<f64>())
            .collect()
    }

    /// Largest eigenvalue of the Hessian of `log f` at `x`.
    fn hessian_top_eigenvalue(&self, x: &[f64]) -> f64 {
        let d = self.dim();
        let local = self.local(x);
        let grad = DVector::from_iterator(
            d,
            (0..d).map(|i| local.b[i] - (0..d).map(|j| local.a[i * d + j] * x[j]).sum::<f64>()),
        );
        let mut h = -DMatrix::from_row_slice(d, d, &local.a) - &grad * grad.transpose();
        for (pj, t) in local.p.iter().zip(&self.terms) {
            let u = DVector::from_iterator(
                d,
                (0..d).map(|i| {
                    t.precision_mean[i] - (0..d).map(|j| t.precision[i * d + j] * x[j]).sum::<f64>()
                }),
            );
            h += *pj * &u * u.transpose();
        }
        h.symmetric_eigenvalues().max()
    }

    /// Runs modal EM from `x0` until the step length falls below
    /// `rel_tol · (1 + ‖x‖)`.
    pub fn ascend(&self, x0: &[f64], opts: &MemOptions) -> Ascent {
        self.ascend_inner(x0, opts, None)
    }

    /// Like [`ModalEm::ascend`], also returning `log f` at every iterate.
    pub fn ascend_traced(&self, x0: &[f64], opts: &MemOptions) -> (Ascent, Vec<f64>) {
        let mut trace = Vec::new();
        let a = self.ascend_inner(x0, opts, Some(&mut trace));
        (a, trace)
    }

    fn ascend_inner(&self, x0: &[f64], opts: &MemOptions, mut trace: Option<&mut Vec<f64>>) -> Ascent {
        let mut x = x0.to_vec();
        let mut prev = f64::NEG_INFINITY;
        let mut converged = false;
        let mut iterations = 0;
        while iterations < opts.max_iter {
            let (next, lf) = self.step(&x);
            debug_assert!(lf >= prev - 1e-10, "modal EM decreased log density: {prev} -> {lf}");
            if let Some(t) = trace.as_deref_mut() {
                t.push(lf);
            }
            prev = lf;
            iterations += 1;
            let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            let delta = next.iter().zip(&x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            x = next;
            if delta < opts.rel_tol * (1.0 + norm) {
                converged = true;
                break;
            }
        }
        let log_density = self.log_density(&x);
        if let Some(t) = trace {
            t.push(log_density);
        }
        Ascent {
            point: x,
            log_density,
            iterations,
            converged,
        }
    }

    /// Ascent with a single perturbed restart when the endpoint is not a
    /// local maximum (large gradient, or a non-negative Hessian direction).
    pub fn ascend_hygienic(&self, x0: &[f64], opts: &MemOptions, scale: f64) -> Ascent {
        let first = self.ascend(x0, opts);
        if !first.converged || self.is_local_max(&first.point) {
            return first;
        }
        let bits: Vec<u64> = x0.iter().map(|v| v.to_bits()).collect();
        let mut rng = stream_rng(derive_seed(0x5eed, &bits), 0);
        let mut dir: Vec<f64> = (0..self.dim()).map(|_| rng.random::<f64>() - 0.5).collect();
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
        dir.iter_mut().for_each(|v| *v *= 1e-4 * scale / norm);
        let start: Vec<f64> = first.point.iter().zip(&dir).map(|(p, e)| p + e).collect();
        let second = self.ascend(&start, opts);
        if second.converged && second.log_density >= first.log_density {
            second
        } else {
            first
        }
    }

    fn is_local_max(&self, x: &[f64]) -> bool {
        let g = self.gradient(x);
        let gn = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        gn <= GRADIENT_TOL && self.hessian_top_eigenvalue(x) < 0.0
    }
}

/// Free-function form of [`ModalEm::ascend`] on a flattened mixture.
pub fn mem_ascend(x0: &[f64], flat: &GaussianMixture, opts: &MemOptions) -> Result<Ascent> {
    if x0.len() != flat.dim() {
        return usage("starting point and mixture dimensions differ");
    }
    Ok(ModalEm::new(flat.clone()).ascend(x0, opts))
}

/// Modal partition of a sample, kept together with the endpoints needed to
/// label new points.
pub struct ModalClustering {
    engine: ModalEm,
    opts: MemOptions,
    scale: f64,
    merge_tol: f64,
    endpoints: Vec<Vec<f64>>,
    partition: Partition,
}

/// Geometric mean of the per-coordinate standard deviations.
pub fn data_scale(data: &DataMatrix) -> f64 {
    let sds = data.column_sds();
    let s = (sds.iter().map(|s| s.max(f64::MIN_POSITIVE).ln()).sum::<f64>() / sds.len() as f64).exp();
    if s.is_finite() && s > 1e-300 {
        s
    } else {
        1.0
    }
}

/// Default merge tolerance: `1e-2 ×` [`data_scale`].
pub fn default_merge_tol(data: &DataMatrix) -> f64 {
    1e-2 * data_scale(data)
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, i: usize) -> usize {
        let mut r = i;
        while self.0[r] != r {
            r = self.0[r];
        }
        let mut c = i;
        while self.0[c] != r {
            let next = self.0[c];
            self.0[c] = r;
            c = next;
        }
        r
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = (ra.min(rb), ra.max(rb));
            self.0[hi] = lo;
        }
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Single-linkage groups of `points` at threshold `tol`, as root indices.
fn single_linkage(points: &[&[f64]], tol: f64) -> Vec<usize> {
    let n = points.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| points[a][0].total_cmp(&points[b][0]).then(a.cmp(&b)));
    let mut uf = UnionFind((0..n).collect());
    for (pos, &i) in order.iter().enumerate() {
        for &j in &order[pos + 1..] {
            if points[j][0] - points[i][0] > tol {
                break;
            }
            if dist(points[i], points[j]) <= tol {
                uf.union(i, j);
            }
        }
    }
    (0..n).map(|i| uf.find(i)).collect()
}

impl ModalClustering {
    /// Ascends from every observation and groups the endpoints.
    pub fn fit(
        data: &DataMatrix,
        ens: &EnsembleDensity,
        merge_tol: Option<f64>,
        opts: MemOptions,
    ) -> Result<Self> {
        Self::fit_mixture(data, ens.flatten(), merge_tol, opts)
    }

    /// Same as [`ModalClustering::fit`] for an already flattened mixture.
    pub fn fit_mixture(
        data: &DataMatrix,
        flat: GaussianMixture,
        merge_tol: Option<f64>,
        opts: MemOptions,
    ) -> Result<Self> {
        if data.dim() != flat.dim() {
            return usage("data and density dimensions differ");
        }
        let scale = data_scale(data);
        let merge_tol = merge_tol.unwrap_or(1e-2 * scale);
        if !(merge_tol >= 0.0) {
            return usage("merge tolerance must be non-negative");
        }
        let engine = ModalEm::new(flat);
        let ascents: Vec<Ascent> = (0..data.n())
            .into_par_iter()
            .map(|i| engine.ascend_hygienic(data.row(i), &opts, scale))
            .collect();

        let mut warnings = Vec::new();
        let converged: Vec<usize> = (0..ascents.len()).filter(|i| ascents[*i].converged).collect();
        if converged.is_empty() {
            return Err(Error::Pipeline("no modal EM ascent converged".into()));
        }
        let pts: Vec<&[f64]> = converged.iter().map(|i| ascents[*i].point.as_slice()).collect();
        let roots = single_linkage(&pts, merge_tol);

        // representative of each group: its highest-density endpoint
        let mut reps: Vec<(usize, usize)> = Vec::new(); // (root, ascent index)
        for (pos, &root) in roots.iter().enumerate() {
            let idx = converged[pos];
            match reps.iter_mut().find(|(r, _)| *r == root) {
                Some((_, best)) => {
                    if ascents[idx].log_density > ascents[*best].log_density {
                        *best = idx;
                    }
                }
                None => reps.push((root, idx)),
            }
        }
        reps.sort_by(|a, b| {
            ascents[b.1]
                .log_density
                .total_cmp(&ascents[a.1].log_density)
                .then(a.1.cmp(&b.1))
        });
        let mut modes: Vec<Mode> = reps
            .iter()
            .map(|(_, idx)| Mode {
                location: ascents[*idx].point.clone(),
                log_density: ascents[*idx].log_density,
                basin_size: 0,
            })
            .collect();

        let mut labels = vec![0usize; ascents.len()];
        for (pos, &root) in roots.iter().enumerate() {
            let label = reps.iter().position(|(r, _)| *r == root).expect("every root has a mode") + 1;
            labels[converged[pos]] = label;
        }
        for (i, a) in ascents.iter().enumerate() {
            if !a.converged {
                let nearest = nearest_mode(&modes, &a.point);
                labels[i] = nearest + 1;
                warnings.push(format!(
                    "observation {} did not converge after {} iterations; assigned to mode {}",
                    i + 1,
                    a.iterations,
                    nearest + 1
                ));
            }
        }
        for l in &labels {
            modes[l - 1].basin_size += 1;
        }
        for w in &warnings {
            log::warn!("{w}");
        }
        let endpoints = ascents.into_iter().map(|a| a.point).collect();
        Ok(Self {
            engine,
            opts,
            scale,
            merge_tol,
            endpoints,
            partition: Partition {
                labels,
                modes,
                method_tag: "modal-em".into(),
                merge_tol: Some(merge_tol),
                warnings,
            },
        })
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn into_partition(self) -> Partition {
        self.partition
    }

    pub fn engine(&self) -> &ModalEm {
        &self.engine
    }

    pub fn merge_tol(&self) -> f64 {
        self.merge_tol
    }

    /// Labels for new points. A point whose ascent ends away from every
    /// known endpoint and mode gets a fresh label, shared by later points of
    /// the same call that reach the same place.
    pub fn predict(&self, points: &DataMatrix) -> Result<Vec<usize>> {
        if points.dim() != self.engine.dim() {
            return usage("points and density dimensions differ");
        }
        let ascents: Vec<Ascent> = (0..points.n())
            .into_par_iter()
            .map(|i| self.engine.ascend_hygienic(points.row(i), &self.opts, self.scale))
            .collect();
        let mut fresh: Vec<Vec<f64>> = Vec::new();
        let k = self.partition.modes.len();
        Ok(ascents
            .iter()
            .map(|a| {
                if let Some(l) = self.known_label(&a.point) {
                    return l;
                }
                if let Some(j) = fresh.iter().position(|f| dist(f, &a.point) <= self.merge_tol) {
                    return k + j + 1;
                }
                if !a.converged {
                    return nearest_mode(&self.partition.modes, &a.point) + 1;
                }
                fresh.push(a.point.clone());
                k + fresh.len()
            })
            .collect())
    }

    fn known_label(&self, p: &[f64]) -> Option<usize> {
        let mut best: Option<(f64, usize)> = None;
        for (e, l) in self.endpoints.iter().zip(&self.partition.labels) {
            let dd = dist(e, p);
            if dd <= self.merge_tol && best.is_none_or(|(bd, _)| dd < bd) {
                best = Some((dd, *l));
            }
        }
        for (j, m) in self.partition.modes.iter().enumerate() {
            let dd = dist(&m.location, p);
            if dd <= self.merge_tol && best.is_none_or(|(bd, _)| dd < bd) {
                best = Some((dd, j + 1));
            }
        }
        best.map(|(_, l)| l)
    }
}

fn nearest_mode(modes: &[Mode], p: &[f64]) -> usize {
    modes
        .iter()
        .enumerate()
        .map(|(j, m)| (j, dist(&m.location, p)))
        .fold((0, f64::INFINITY), |b, c| if c.1 < b.1 { c } else { b })
        .0
}

/// Modal partition of `data` under the ensemble density.
pub fn find_partition(
    data: &DataMatrix,
    ens: &EnsembleDensity,
    merge_tol: Option<f64>,
    opts: MemOptions,
) -> Result<Partition> {
    ModalClustering::fit(data, ens, merge_tol, opts).map(ModalClustering::into_partition)
}

/// Labels for new points under an existing modal clustering.
pub fn predict_labels(new_points: &DataMatrix, context: &ModalClustering) -> Result<Vec<usize>> {
    context.predict(new_points)
}
