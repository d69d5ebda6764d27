use rand::Rng as _;
use rayon::prelude::*;

use crate::error::{usage, Result};
use crate::mixture::LogDensity;
use crate::rng::stream_rng;

/// Regular grid for trapezoid-rule integration over a box.
#[derive(Debug, Clone, PartialEq)]
pub struct IseGrid {
    pub bounds: Vec<(f64, f64)>,
    /// Nodes per dimension.
    pub resolution: usize,
}

impl IseGrid {
    pub fn new(bounds: Vec<(f64, f64)>, resolution: usize) -> Result<Self> {
        if bounds.is_empty() {
            return usage("grid needs at least one dimension");
        }
        if bounds.iter().any(|(lo, hi)| !(lo < hi) || !lo.is_finite() || !hi.is_finite()) {
            return usage("grid bounds need lo < hi");
        }
        if resolution < 2 {
            return usage("grid resolution must be at least 2");
        }
        Ok(Self { bounds, resolution })
    }

    /// Box of `mean ± half_width · sd` in every coordinate.
    pub fn around(mean: &[f64], sd: &[f64], half_width: f64, resolution: usize) -> Result<Self> {
        let bounds = mean
            .iter()
            .zip(sd)
            .map(|(m, s)| (m - half_width * s, m + half_width * s))
            .collect();
        Self::new(bounds, resolution)
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn steps(&self) -> Vec<f64> {
        self.bounds
            .iter()
            .map(|(lo, hi)| (hi - lo) / (self.resolution - 1) as f64)
            .collect()
    }

    pub fn cell_volume(&self) -> f64 {
        self.steps().iter().product()
    }

    /// Whether the box reaches `k` standard deviations either side of `mean`.
    pub fn covers(&self, mean: &[f64], sd: &[f64], k: f64) -> bool {
        self.bounds
            .iter()
            .zip(mean.iter().zip(sd))
            .all(|((lo, hi), (m, s))| *lo <= m - k * s && *hi >= m + k * s)
    }

    fn node(&self, idx: &[usize], steps: &[f64], out: &mut [f64]) {
        for ((o, (lo, _)), (i, h)) in out.iter_mut().zip(&self.bounds).zip(idx.iter().zip(steps)) {
            *o = lo + *i as f64 * h;
        }
    }

    /// Trapezoid rule for `∫ g` over the box. Rows of the first coordinate
    /// are evaluated in parallel and summed in index order.
    pub fn integrate<F: Fn(&[f64]) -> f64 + Sync>(&self, g: F) -> f64 {
        let d = self.dim();
        let r = self.resolution;
        let steps = self.steps();
        let end_weight = |i: usize| if i == 0 || i == r - 1 { 0.5 } else { 1.0 };
        let inner = r.pow((d - 1) as u32);
        let rows: Vec<f64> = (0..r)
            .into_par_iter()
            .map(|i0| {
                let mut idx = vec![0usize; d];
                idx[0] = i0;
                let mut x = vec![0.0; d];
                let mut acc = 0.0;
                for flat in 0..inner {
                    let mut rem = flat;
                    let mut w = end_weight(i0);
                    for slot in idx.iter_mut().skip(1).rev() {
                        *slot = rem % r;
                        rem /= r;
                        w *= end_weight(*slot);
                    }
                    self.node(&idx, &steps, &mut x);
                    acc += w * g(&x);
                }
                acc
            })
            .collect();
        rows.iter().sum::<f64>() * self.cell_volume()
    }
}

/// Integrated squared error `∫ (f̂ − f)²` by the trapezoid rule on `grid`.
pub fn ise<E: LogDensity + ?Sized, T: LogDensity + ?Sized>(est: &E, truth: &T, grid: &IseGrid) -> Result<f64> {
    if est.dim() != truth.dim() || est.dim() != grid.dim() {
        return usage("estimate, truth and grid dimensions differ");
    }
    let v = grid.integrate(|x| {
        let diff = est.ln_density(x).exp() - truth.ln_density(x).exp();
        diff * diff
    });
    Ok(v.max(0.0))
}

/// Integrated squared error by uniform Monte Carlo over the grid's box, for
/// dimensions where a full grid is too large.
pub fn ise_monte_carlo<E: LogDensity + ?Sized, T: LogDensity + ?Sized>(
    est: &E,
    truth: &T,
    bounds: &[(f64, f64)],
    draws: usize,
    seed: u64,
) -> Result<f64> {
    if est.dim() != truth.dim() || est.dim() != bounds.len() {
        return usage("estimate, truth and box dimensions differ");
    }
    if draws == 0 {
        return usage("need at least one draw");
    }
    let mut rng = stream_rng(seed, 0);
    let volume: f64 = bounds.iter().map(|(lo, hi)| hi - lo).product();
    let mut x = vec![0.0; bounds.len()];
    let mut acc = 0.0;
    for _ in 0..draws {
        for (xv, (lo, hi)) in x.iter_mut().zip(bounds) {
            *xv = lo + (hi - lo) * rng.random::<f64>();
        }
        let diff = est.ln_density(&x).exp() - truth.ln_density(&x).exp();
        acc += diff * diff;
    }
    Ok(volume * acc / draws as f64)
}
