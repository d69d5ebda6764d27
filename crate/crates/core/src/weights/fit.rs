use serde::{Deserialize, Serialize};

use super::{check_alpha, e_step_unchecked, loglik_unchecked, mstep, LogDensityMatrix, PenaltySpec};
use crate::error::{usage, Result};

/// Weight below which a model is reported as dropped from the ensemble.
pub const DROP_THRESHOLD: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Default)]
pub enum WeightInit {
    #[default]
    Uniform,
    Given(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightFitOptions {
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl Default for WeightFitOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            max_iter: 1000,
        }
    }
}

/// Penalized maximum-likelihood ensemble weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightFit {
    pub alpha: Vec<f64>,
    pub lambda: f64,
    pub loglik: f64,
    pub penalized_loglik: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Indices of models whose weight fell below [`DROP_THRESHOLD`].
    pub dropped_models: Vec<usize>,
    /// Some M-step fell back to the unpenalized update.
    #[serde(default)]
    pub mstep_fallback: bool,
    /// Penalized log-likelihood after each iteration, starting point first.
    #[serde(skip)]
    pub trace: Vec<f64>,
}

/// EM for the ensemble weights: alternate [`super::e_step`] and
/// [`super::m_step`], with SQUAREM extrapolation, until the relative change
/// of the penalized log-likelihood drops below `rel_tol`.
pub fn fit_weights(
    density: &LogDensityMatrix,
    penalty: &PenaltySpec,
    init: &WeightInit,
    options: &WeightFitOptions,
) -> Result<WeightFit> {
    let m = density.m();
    penalty.check(m)?;
    if !(options.rel_tol > 0.0) {
        return usage("rel_tol must be positive");
    }
    let mut alpha = match init {
        WeightInit::Uniform => vec![1.0 / m as f64; m],
        WeightInit::Given(a) => {
            check_alpha(a, m)?;
            a.clone()
        }
    };
    let objective = |a: &[f64]| {
        let ll = loglik_unchecked(a, density);
        (ll, ll - penalty.value(a))
    };
    let (mut ll, mut lp) = objective(&alpha);
    let mut trace = vec![lp];
    if m == 1 {
        return Ok(finish(alpha, penalty, ll, lp, 0, true, false, trace));
    }

    let mut fallback = false;
    let mut em_map = |a: &[f64]| {
        let step = mstep::solve(&e_step_unchecked(a, density).totals(), penalty);
        fallback |= step.fallback;
        step.alpha
    };
    let mut converged = false;
    let mut iterations = 0;
    // Each iteration is one SQUAREM cycle: two EM maps, an extrapolation
    // along their secant, and a stabilizing EM map. The extrapolated point
    // is kept only if it beats the plain two-step iterate, so every cycle
    // ascends at least as much as two EM steps.
    while iterations < options.max_iter {
        iterations += 1;
        let a1 = em_map(&alpha);
        let a2 = em_map(&a1);
        let (mut next, (mut next_ll, mut next_lp)) = {
            let o = objective(&a2);
            (a2.clone(), o)
        };
        let r: Vec<f64> = a1.iter().zip(&alpha).map(|(x, y)| x - y).collect();
        let v: Vec<f64> = a2.iter().zip(&a1).zip(&r).map(|((x, y), r)| x - y - r).collect();
        let (rn, vn) = (norm(&r), norm(&v));
        if vn > 0.0 && rn > 0.0 {
            let step = (-rn / vn).min(-1.0);
            let raw: Vec<f64> = alpha
                .iter()
                .zip(&r)
                .zip(&v)
                .map(|((a, r), v)| (a - 2.0 * step * r + step * step * v).max(0.0))
                .collect();
            let total: f64 = raw.iter().sum();
            if total.is_finite() && total > 0.0 {
                let jumped = mstep::floor(raw.into_iter().map(|x| x / total).collect());
                let a3 = em_map(&jumped);
                let (ll3, lp3) = objective(&a3);
                if lp3 > next_lp {
                    next = a3;
                    next_ll = ll3;
                    next_lp = lp3;
                }
            }
        }
        trace.push(next_lp);
        let done = (next_lp - lp).abs() <= options.rel_tol * next_lp.abs();
        alpha = next;
        ll = next_ll;
        lp = next_lp;
        if done {
            converged = true;
            break;
        }
    }
    Ok(finish(alpha, penalty, ll, lp, iterations, converged, fallback, trace))
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[allow(clippy::too_many_arguments)]
fn finish(
    alpha: Vec<f64>,
    penalty: &PenaltySpec,
    loglik: f64,
    penalized_loglik: f64,
    iterations: usize,
    converged: bool,
    mstep_fallback: bool,
    trace: Vec<f64>,
) -> WeightFit {
    let dropped_models = alpha
        .iter()
        .enumerate()
        .filter(|(_, a)| **a < DROP_THRESHOLD)
        .map(|(i, _)| i)
        .collect();
    WeightFit {
        alpha,
        lambda: penalty.lambda,
        loglik,
        penalized_loglik,
        iterations,
        converged,
        dropped_models,
        mstep_fallback,
        trace,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::tests::random_matrix;
    use approx::assert_relative_eq;

    /// Plain mixture-weight EM, written independently of the penalized path.
    fn unpenalized_oracle(d: &LogDensityMatrix) -> Vec<f64> {
        let m = d.m();
        let mut a = vec![1.0 / m as f64; m];
        for _ in 0..100_000 {
            let mut t = vec![0.0; m];
            for row in d.rows() {
                let w: Vec<f64> = row.iter().zip(&a).map(|(l, a)| a * l.exp()).collect();
                let s: f64 = w.iter().sum();
                for (tv, wv) in t.iter_mut().zip(&w) {
                    *tv += wv / s;
                }
            }
            let next: Vec<f64> = t.iter().map(|v| v / d.n() as f64).collect();
            let delta = next.iter().zip(&a).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            a = next;
            if delta < 1e-13 {
                break;
            }
        }
        a
    }

    #[test]
    fn single_model_is_trivial() {
        let d = random_matrix(1, 10, 1);
        let fit = fit_weights(&d, &PenaltySpec::new(3.0, vec![4]).unwrap(), &WeightInit::Uniform, &Default::default())
            .unwrap();
        assert_eq!(fit.alpha, vec![1.0]);
        assert_eq!(fit.iterations, 0);
        assert!(fit.converged);
    }

    #[test]
    fn zero_lambda_matches_plain_mixture_em() {
        let d = random_matrix(2, 40, 3);
        let opts = WeightFitOptions {
            rel_tol: 1e-14,
            max_iter: 100_000,
        };
        let fit = fit_weights(&d, &PenaltySpec::new(0.0, vec![1, 2, 3]).unwrap(), &WeightInit::Uniform, &opts)
            .unwrap();
        let oracle = unpenalized_oracle(&d);
        for (a, b) in fit.alpha.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
        assert_relative_eq!(fit.loglik, fit.penalized_loglik);
    }

    #[test]
    fn ascent_and_simplex_closure() {
        for seed in 0..20 {
            let d = random_matrix(100 + seed, 30, 4);
            let p = PenaltySpec::new(0.5 * seed as f64, vec![3, 8, 15, 2]).unwrap();
            let fit = fit_weights(&d, &p, &WeightInit::Uniform, &Default::default()).unwrap();
            for w in fit.trace.windows(2) {
                assert!(w[1] >= w[0] - 1e-8);
            }
            assert_relative_eq!(fit.alpha.iter().sum::<f64>(), 1.0, epsilon = 1e-10);
            assert!(fit.alpha.iter().all(|a| *a >= 1e-12 * (1.0 - 1e-9)));
        }
    }

    #[test]
    fn huge_penalty_concentrates_on_simplest_model() {
        let d = random_matrix(3, 50, 2);
        let p = PenaltySpec::new(1e6, vec![17, 6]).unwrap();
        let fit = fit_weights(&d, &p, &WeightInit::Uniform, &Default::default()).unwrap();
        assert!(fit.alpha[1] >= 0.999, "{:?}", fit.alpha);
        assert_eq!(fit.dropped_models, vec![0]);
    }

    #[test]
    fn rejects_bad_init() {
        let d = random_matrix(4, 5, 2);
        let p = PenaltySpec::new(1.0, vec![1, 2]).unwrap();
        assert!(fit_weights(&d, &p, &WeightInit::Given(vec![0.9, 0.2]), &Default::default()).is_err());
    }
}
