//! Randomized property checks shared by the property tests and the
//! acceptance harness. Each returns `Err(description)` on the first
//! violation.

#![allow(dead_code)]

use ensdens::eval::{adjusted_rand_index, ise, IseGrid};
use ensdens::mixture::{CovarianceStructure, GaussianComponent, GaussianMixture, LogDensity};
use ensdens::modal::{MemOptions, ModalEm};
use ensdens::rng::{stream_rng, Rng};
use ensdens::sim::{ScenarioId, ScenarioSpec};
use ensdens::weights::{
    e_step, fit_weights, m_step, LogDensityMatrix, PenaltySpec, WeightFitOptions, WeightInit,
};
use ensdens::EnsembleDensity;
use rand::Rng as _;

pub type Check = Result<(), String>;

pub fn random_density(rng: &mut Rng, n: usize, m: usize) -> LogDensityMatrix {
    let values = (0..n * m).map(|_| rng.random_range(-8.0..2.0)).collect();
    LogDensityMatrix::new(values, n, m).unwrap()
}

fn random_simplex(rng: &mut Rng, m: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..m).map(|_| rng.random_range(0.05..1.0)).collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / s).collect()
}

pub fn random_mixture(rng: &mut Rng, k: usize, d: usize) -> GaussianMixture {
    let comps = (0..k)
        .map(|_| {
            let mean: Vec<f64> = (0..d).map(|_| rng.random_range(-3.0..3.0)).collect();
            // A Aᵀ + c I is symmetric positive definite.
            let a: Vec<f64> = (0..d * d).map(|_| rng.random_range(-1.0..1.0)).collect();
            let jitter = rng.random_range(0.05..0.5);
            let cov: Vec<f64> = (0..d * d)
                .map(|ij| {
                    let (i, j) = (ij / d, ij % d);
                    let dot: f64 = (0..d).map(|l| a[i * d + l] * a[j * d + l]).sum();
                    dot + if i == j { jitter } else { 0.0 }
                })
                .collect();
            GaussianComponent::from_row_major(mean, &cov).unwrap()
        })
        .collect();
    GaussianMixture::new(random_simplex(rng, k), comps, CovarianceStructure::VVV).unwrap()
}

/// Penalized weight EM never decreases its objective.
pub fn weight_ascent(fixtures: u64) -> Check {
    for f in 0..fixtures {
        let mut rng = stream_rng(1000 + f, 0);
        let n = rng.random_range(5..=100);
        let m = rng.random_range(1..=5);
        let density = random_density(&mut rng, n, m);
        let nu: Vec<usize> = (0..m).map(|_| rng.random_range(1..=40)).collect();
        let lambda = rng.random_range(0.0..6.0);
        let init = WeightInit::Given(random_simplex(&mut rng, m));
        let fit = fit_weights(&density, &PenaltySpec::new(lambda, nu).unwrap(), &init, &WeightFitOptions::default())
            .map_err(|e| e.to_string())?;
        for (t, w) in fit.trace.windows(2).enumerate() {
            if w[1] < w[0] - 1e-8 {
                return Err(format!("fixture {f}: objective fell {} -> {} at step {t}", w[0], w[1]));
            }
        }
        let sum: f64 = fit.alpha.iter().sum();
        if (sum - 1.0).abs() > 1e-10 || fit.alpha.iter().any(|a| *a < 0.0) {
            return Err(format!("fixture {f}: alpha left the simplex: {:?}", fit.alpha));
        }
    }
    Ok(())
}

/// The flattened ensemble has the same density as the ensemble.
pub fn flatten_equivalence(pairs: u64) -> Check {
    for p in 0..pairs {
        let mut rng = stream_rng(2000 + p, 0);
        let d = rng.random_range(1..=3);
        let m = rng.random_range(1..=4);
        let models: Vec<GaussianMixture> = (0..m)
            .map(|_| {
                let k = rng.random_range(1..=3);
                random_mixture(&mut rng, k, d)
            })
            .collect();
        let ens = EnsembleDensity::new(models, random_simplex(&mut rng, m)).unwrap();
        let flat = ens.flatten();
        let x: Vec<f64> = (0..d).map(|_| rng.random_range(-4.0..4.0)).collect();
        let (a, b) = (ens.ln_density(&x), flat.ln_density(&x));
        let rel = (b - a).exp_m1().abs();
        if !(rel <= 1e-12) {
            return Err(format!("pair {p}: relative error {rel:e}"));
        }
    }
    Ok(())
}

/// With no penalty the M-step is the empirical share `T_m / n`.
pub fn zero_penalty_mstep(fixtures: u64) -> Check {
    for f in 0..fixtures {
        let mut rng = stream_rng(3000 + f, 0);
        let n = rng.random_range(2..=100);
        let m = rng.random_range(1..=6);
        let density = random_density(&mut rng, n, m);
        let tau = e_step(&random_simplex(&mut rng, m), &density).unwrap();
        let nu: Vec<usize> = (0..m).map(|_| rng.random_range(1..=40)).collect();
        let step = m_step(&tau, &density, &PenaltySpec::new(0.0, nu).unwrap()).unwrap();
        for (a, t) in step.alpha.iter().zip(tau.totals()) {
            let expect = (t / n as f64).max(1e-12);
            if (a - expect).abs() > 1e-12 {
                return Err(format!("fixture {f}: {a} vs {expect}"));
            }
        }
    }
    Ok(())
}

/// A huge penalty puts (almost) all mass on the least complex model.
pub fn penalty_dominance(fixtures: u64) -> Check {
    for f in 0..fixtures {
        let mut rng = stream_rng(4000 + f, 0);
        let n = rng.random_range(10..=100);
        let m = rng.random_range(2..=5);
        let density = random_density(&mut rng, n, m);
        let mut nu: Vec<usize> = (1..=m).map(|i| 3 * i + rng.random_range(0..3)).collect();
        // shuffle so the simplest model is not always first
        for i in (1..m).rev() {
            nu.swap(i, rng.random_range(0..=i));
        }
        let simplest = (0..m).min_by_key(|i| nu[*i]).unwrap();
        let fit = fit_weights(&density, &PenaltySpec::new(1e6, nu).unwrap(), &WeightInit::Uniform, &Default::default())
            .map_err(|e| e.to_string())?;
        if !(fit.alpha[simplest] > 1.0 - 1e-3) {
            return Err(format!("fixture {f}: weight of simplest model {}", fit.alpha[simplest]));
        }
    }
    Ok(())
}

/// Modal EM paths ascend, and their endpoints are fixed points.
pub fn modal_ascent(paths: u64) -> Check {
    let opts = MemOptions::default();
    for p in 0..paths {
        let mut rng = stream_rng(5000 + p, 0);
        let d = rng.random_range(1..=3);
        let k = rng.random_range(1..=6);
        let engine = ModalEm::new(random_mixture(&mut rng, k, d));
        let x0: Vec<f64> = (0..d).map(|_| rng.random_range(-5.0..5.0)).collect();
        let (ascent, trace) = engine.ascend_traced(&x0, &opts);
        for (t, w) in trace.windows(2).enumerate() {
            if w[1] < w[0] - 1e-10 {
                return Err(format!("path {p}: log density fell {} -> {} at step {t}", w[0], w[1]));
            }
        }
        if !ascent.converged {
            return Err(format!("path {p}: did not converge"));
        }
        let (next, _) = engine.step(&ascent.point);
        let moved = next
            .iter()
            .zip(&ascent.point)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        if moved > 1e-8 {
            return Err(format!("path {p}: endpoint moves {moved:e} under one more step"));
        }
    }
    Ok(())
}

/// All set partitions of `0..n` as restricted growth strings.
pub fn set_partitions(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current = vec![0usize; n];
    fn rec(i: usize, max: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if i == cur.len() {
            out.push(cur.clone());
            return;
        }
        for v in 0..=max + 1 {
            cur[i] = v;
            rec(i + 1, max.max(v), cur, out);
        }
    }
    if n > 0 {
        rec(1, 0, &mut current, &mut out);
    }
    out
}

/// ARI from the four pair counts, the definition the contingency formula
/// reorganizes.
pub fn pair_counting_ari(a: &[usize], b: &[usize]) -> f64 {
    let (mut n11, mut n10, mut n01, mut n00) = (0f64, 0f64, 0f64, 0f64);
    for i in 0..a.len() {
        for j in i + 1..a.len() {
            match (a[i] == a[j], b[i] == b[j]) {
                (true, true) => n11 += 1.0,
                (true, false) => n10 += 1.0,
                (false, true) => n01 += 1.0,
                (false, false) => n00 += 1.0,
            }
        }
    }
    let den = (n00 + n01) * (n01 + n11) + (n00 + n10) * (n10 + n11);
    if den == 0.0 {
        1.0
    } else {
        2.0 * (n00 * n11 - n01 * n10) / den
    }
}

/// Contingency-table ARI against brute-force pair counting. Every pair of
/// partitions is compared for n ≤ 6; for n = 7, 8 every partition is
/// compared with a fixed random sample of partners.
pub fn ari_brute_force() -> Check {
    let mut rng = stream_rng(6000, 0);
    for n in 2..=8 {
        let parts = set_partitions(n);
        let partners: Vec<&Vec<usize>> = if n <= 6 {
            parts.iter().collect()
        } else {
            (0..25).map(|_| &parts[rng.random_range(0..parts.len())]).collect()
        };
        for a in &parts {
            for b in &partners {
                let fast = adjusted_rand_index(a, b).map_err(|e| e.to_string())?;
                let slow = pair_counting_ari(a, b);
                if (fast - slow).abs() > 1e-12 {
                    return Err(format!("{a:?} vs {b:?}: {fast} vs {slow}"));
                }
            }
        }
    }
    Ok(())
}

/// ISE vanishes between a density and itself, and reproduces the closed
/// form `2(1 − e^{−1/4}) / (4π)` for N(0, I₂) against N((1, 0), I₂).
pub fn ise_checks() -> Check {
    for id in ScenarioId::ALL {
        let spec = ScenarioSpec::new(id);
        let v = ise(&spec, &spec, &spec.ise_grid(400).unwrap()).map_err(|e| e.to_string())?;
        if !(v <= 1e-10) {
            return Err(format!("ISE(f, f) = {v:e} on {id}"));
        }
    }
    let unit = |m: [f64; 2]| {
        let c = GaussianComponent::from_row_major(m.to_vec(), &[1.0, 0.0, 0.0, 1.0]).unwrap();
        GaussianMixture::new(vec![1.0], vec![c], CovarianceStructure::VVV).unwrap()
    };
    let grid = IseGrid::around(&[0.5, 0.0], &[1.0, 1.0], 8.0, 400).unwrap();
    let got = ise(&unit([0.0, 0.0]), &unit([1.0, 0.0]), &grid).map_err(|e| e.to_string())?;
    let want = 2.0 * (1.0 - (-0.25f64).exp()) / (4.0 * std::f64::consts::PI);
    if ((got - want) / want).abs() > 1e-3 {
        return Err(format!("two-Gaussian L2 distance {got} vs {want}"));
    }
    Ok(())
}
