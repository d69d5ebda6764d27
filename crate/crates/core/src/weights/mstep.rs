use super::{LogDensityMatrix, PenaltySpec, Responsibilities, ALPHA_FLOOR};
use crate::error::{usage, Result};

/// Weights produced by one M-step.
#[derive(Debug, Clone, PartialEq)]
pub struct MStep {
    pub alpha: Vec<f64>,
    /// The penalized maximizer could not be located and the unpenalized
    /// closed form `Σ_i τ_mi / n` was returned instead.
    pub fallback: bool,
}

/// Expected complete-data penalized log-likelihood
/// `Σ_m Σ_i τ_mi [log α_m + log f_m(x_i)] − λ Σ_m α_m ν_m`.
pub fn q_penalized(
    alpha: &[f64],
    tau: &Responsibilities,
    density: &LogDensityMatrix,
    penalty: &PenaltySpec,
) -> f64 {
    let log_alpha: Vec<f64> = alpha.iter().map(|a| a.ln()).collect();
    let mut q = 0.0;
    for i in 0..tau.n() {
        for ((t, la), l) in tau.row(i).iter().zip(&log_alpha).zip(density.row(i)) {
            q += t * (la + l);
        }
    }
    q - penalty.value(alpha)
}

/// Maximizes the penalized `Q` function over the simplex.
///
/// With `T_m = Σ_i τ_mi` and `c_m = λ ν_m`, the stationarity conditions give
/// `α_m = T_m / (μ + c_m)` for the multiplier `μ` solving
/// `Σ_m T_m / (μ + c_m) = 1`. The left side is convex and decreasing in `μ`,
/// so a bracketed Newton iteration finds the unique root.
pub fn m_step(tau: &Responsibilities, density: &LogDensityMatrix, penalty: &PenaltySpec) -> Result<MStep> {
    if tau.n() != density.n() || tau.m() != density.m() {
        return usage("responsibilities and log-density matrix differ in shape");
    }
    penalty.check(tau.m())?;
    Ok(solve(&tau.totals(), penalty))
}

pub(crate) fn solve(totals: &[f64], penalty: &PenaltySpec) -> MStep {
    let n: f64 = totals.iter().sum();
    let closed_form = || floor(totals.iter().map(|t| t / n).collect());
    let c_min = penalty.nu.iter().copied().min().unwrap_or(0) as f64 * penalty.lambda;
    let c: Vec<f64> = penalty.nu.iter().map(|v| penalty.lambda * *v as f64 - c_min).collect();
    if c.iter().all(|v| *v == 0.0) {
        return MStep {
            alpha: closed_form(),
            fallback: false,
        };
    }

    let g = |mu: f64| -> (f64, f64) {
        totals.iter().zip(&c).fold((-1.0, 0.0), |(g, dg), (t, c)| {
            let r = 1.0 / (mu + c);
            (g + t * r, dg - t * r * r)
        })
    };
    // g(0+) = +inf, g(n) <= 0
    let (mut lo, mut hi) = (0.0f64, n);
    let mut mu = n;
    let mut root = None;
    for _ in 0..200 {
        let (gv, dg) = g(mu);
        if gv == 0.0 {
            root = Some(mu);
            break;
        }
        if gv > 0.0 {
            lo = mu;
        } else {
            hi = mu;
        }
        let mut next = mu - gv / dg;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - mu).abs() <= 1e-15 * mu.abs() || hi - lo <= 1e-15 * hi {
            root = Some(next);
            break;
        }
        mu = next;
    }
    match root {
        Some(mu) if mu.is_finite() && mu > 0.0 => MStep {
            alpha: floor(totals.iter().zip(&c).map(|(t, c)| t / (mu + c)).collect()),
            fallback: false,
        },
        _ => {
            log::warn!("penalized M-step did not converge; using unpenalized weights");
            MStep {
                alpha: closed_form(),
                fallback: true,
            }
        }
    }
}

/// Normalizes onto the simplex with every weight at least [`ALPHA_FLOOR`].
pub(crate) fn floor(mut alpha: Vec<f64>) -> Vec<f64> {
    let total: f64 = alpha.iter().sum();
    alpha.iter_mut().for_each(|a| *a /= total);
    let low = alpha.iter().filter(|a| **a < ALPHA_FLOOR).count();
    if low > 0 {
        let rest: f64 = alpha.iter().filter(|a| **a >= ALPHA_FLOOR).sum();
        let scale = (1.0 - low as f64 * ALPHA_FLOOR) / rest;
        alpha
            .iter_mut()
            .for_each(|a| *a = if *a < ALPHA_FLOOR { ALPHA_FLOOR } else { *a * scale });
    }
    alpha
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::e_step;
    use crate::weights::tests::random_matrix;
    use approx::assert_relative_eq;

    #[test]
    fn zero_lambda_is_closed_form() {
        let d = random_matrix(10, 20, 3);
        let tau = e_step(&[0.2, 0.5, 0.3], &d).unwrap();
        let step = m_step(&tau, &d, &PenaltySpec::new(0.0, vec![3, 9, 17]).unwrap()).unwrap();
        for (a, t) in step.alpha.iter().zip(tau.totals()) {
            assert_relative_eq!(*a, t / 20.0, epsilon = 1e-12);
        }
        let equal = m_step(&tau, &d, &PenaltySpec::new(4.0, vec![7, 7, 7]).unwrap()).unwrap();
        assert_eq!(equal.alpha, step.alpha);
    }

    #[test]
    fn heavier_penalty_favors_simpler_model() {
        // uniform responsibilities
        let d = LogDensityMatrix::new(vec![-1.0; 40], 20, 2).unwrap();
        let tau = e_step(&[0.5, 0.5], &d).unwrap();
        let p = PenaltySpec::new(5.0, vec![2, 40]).unwrap();
        let step = m_step(&tau, &d, &p).unwrap();
        assert!(step.alpha[0] > step.alpha[1]);
        // grid search over the 1-simplex at 1e-4 resolution
        let mut best = (0.0, f64::NEG_INFINITY);
        for i in 1..10_000 {
            let a = i as f64 * 1e-4;
            let q = q_penalized(&[a, 1.0 - a], &tau, &d, &p);
            if q > best.1 {
                best = (a, q);
            }
        }
        assert!((step.alpha[0] - best.0).abs() <= 1e-4);
        assert!(q_penalized(&step.alpha, &tau, &d, &p) >= best.1 - 1e-9);
    }

    #[test]
    fn stationary_in_softmax_coordinates() {
        // with α = softmax(β), β_M = 0, ∂Q/∂β_j = T_j − n α_j − α_j (c_j − c̄)
        let d = random_matrix(12, 30, 4);
        let tau = e_step(&[0.1, 0.2, 0.3, 0.4], &d).unwrap();
        let p = PenaltySpec::new(2.5, vec![5, 11, 17, 29]).unwrap();
        let alpha = m_step(&tau, &d, &p).unwrap().alpha;
        let t = tau.totals();
        let c: Vec<f64> = p.nu.iter().map(|v| p.lambda * *v as f64).collect();
        let cbar: f64 = alpha.iter().zip(&c).map(|(a, c)| a * c).sum();
        for j in 0..3 {
            let grad = t[j] - 30.0 * alpha[j] - alpha[j] * (c[j] - cbar);
            assert!(grad.abs() < 1e-9, "component {j}: {grad}");
        }
        // finite-difference check of the same gradient
        let q = |beta: &[f64]| {
            let mx = beta.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = beta.iter().map(|b| (b - mx).exp()).collect();
            let s: f64 = e.iter().sum();
            let a: Vec<f64> = e.iter().map(|v| v / s).collect();
            q_penalized(&a, &tau, &d, &p)
        };
        let beta: Vec<f64> = alpha.iter().map(|a| (a / alpha[3]).ln()).collect();
        for j in 0..3 {
            let h = 1e-5;
            let mut up = beta.clone();
            up[j] += h;
            let mut dn = beta.clone();
            dn[j] -= h;
            let fd = (q(&up) - q(&dn)) / (2.0 * h);
            assert!(fd.abs() < 1e-5, "finite difference {fd}");
        }
    }

    #[test]
    fn never_decreases_q() {
        let d = random_matrix(13, 25, 3);
        let prev = [0.6, 0.3, 0.1];
        let tau = e_step(&prev, &d).unwrap();
        let p = PenaltySpec::new(1.7, vec![4, 9, 20]).unwrap();
        let next = m_step(&tau, &d, &p).unwrap().alpha;
        assert!(q_penalized(&next, &tau, &d, &p) >= q_penalized(&prev, &tau, &d, &p) - 1e-9);
    }

    #[test]
    fn floor_keeps_simplex() {
        let a = floor(vec![1.0, 1e-30, 0.0]);
        assert!(a.iter().all(|v| *v >= ALPHA_FLOOR));
        assert_relative_eq!(a.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    }
}
