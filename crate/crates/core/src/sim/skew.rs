use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::Serialize;
use statrs::function::erf::erfc;

use crate::error::{usage, Result};
use crate::mixture::{GaussianComponent, LogDensity};
use crate::rng::Rng;

/// `ln Φ(z)`, accurate far into the lower tail.
pub fn log_normal_cdf(z: f64) -> f64 {
    if z > -35.0 {
        (0.5 * erfc(-z / std::f64::consts::SQRT_2)).ln()
    } else {
        // Mills-ratio expansion; relative error below 1e-8 here.
        let z2 = z * z;
        -0.5 * z2 - 0.5 * (2.0 * std::f64::consts::PI).ln() - (-z).ln() + (1.0 - 1.0 / z2 + 3.0 / (z2 * z2)).ln()
    }
}

/// Multivariate skew-normal `Y = ξ + δ|U₀| + U` with `U₀ ~ N(0,1)` and
/// `U ~ N(0, Ω)` independent. Its density is
/// `2 φ(y; ξ, Ω + δδᵀ) Φ(δᵀΩ⁻¹(y−ξ) / √(1 + δᵀΩ⁻¹δ))`.
#[derive(Debug, Clone, Serialize)]
pub struct SkewNormalComponent {
    location: Vec<f64>,
    scale: Vec<Vec<f64>>,
    slant: Vec<f64>,
    #[serde(skip)]
    marginal: GaussianComponent,
    #[serde(skip)]
    shape: Vec<f64>,
    #[serde(skip)]
    chol: DMatrix<f64>,
}

impl SkewNormalComponent {
    pub fn new(location: Vec<f64>, scale: DMatrix<f64>, slant: Vec<f64>) -> Result<Self> {
        let d = location.len();
        if slant.len() != d || scale.nrows() != d || scale.ncols() != d {
            return usage("skew-normal location, scale and slant dimensions differ");
        }
        if slant.iter().any(|v| !v.is_finite()) {
            return usage("skew-normal slant must be finite");
        }
        let base = GaussianComponent::new(location.clone(), scale.clone())?;
        let chol = scale.clone().cholesky().expect("checked positive definite").l();
        let delta = DVector::from_column_slice(&slant);
        let omega_inv_delta = DMatrix::from_row_slice(d, d, base.precision()) * &delta;
        let q = delta.dot(&omega_inv_delta);
        let shape = (omega_inv_delta / (1.0 + q).sqrt()).as_slice().to_vec();
        let marginal = GaussianComponent::new(location.clone(), &scale + &delta * delta.transpose())?;
        Ok(Self {
            location,
            scale: (0..d).map(|i| scale.row(i).iter().copied().collect()).collect(),
            slant,
            marginal,
            shape,
            chol,
        })
    }

    pub fn location(&self) -> &[f64] {
        &self.location
    }

    pub fn slant(&self) -> &[f64] {
        &self.slant
    }

    /// `ξ + √(2/π) δ`.
    pub fn mean(&self) -> Vec<f64> {
        let c = (2.0 / std::f64::consts::PI).sqrt();
        self.location.iter().zip(&self.slant).map(|(x, s)| x + c * s).collect()
    }

    /// `Ω + (1 − 2/π) δδᵀ`.
    pub fn covariance(&self) -> DMatrix<f64> {
        let d = self.location.len();
        let c = 1.0 - 2.0 / std::f64::consts::PI;
        DMatrix::from_fn(d, d, |i, j| self.scale[i][j] + c * self.slant[i] * self.slant[j])
    }

    pub fn ln_pdf(&self, x: &[f64]) -> f64 {
        let arg: f64 = self
            .shape
            .iter()
            .zip(x.iter().zip(&self.location))
            .map(|(a, (xi, li))| a * (xi - li))
            .sum();
        std::f64::consts::LN_2 + self.marginal.lpdf(x) + log_normal_cdf(arg)
    }

    pub fn sample(&self, rng: &mut Rng) -> Vec<f64> {
        let d = self.location.len();
        let u0: f64 = rng.sample(StandardNormal);
        let u = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let z = &self.chol * u;
        let sign = if u0 < 0.0 { -1.0 } else { 1.0 };
        (0..d)
            .map(|i| self.location[i] + sign * (self.slant[i] * u0 + z[i]))
            .collect()
    }
}

impl LogDensity for SkewNormalComponent {
    fn dim(&self) -> usize {
        self.location.len()
    }

    fn ln_density(&self, x: &[f64]) -> f64 {
        self.ln_pdf(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn log_cdf_matches_reference_and_is_continuous() {
        assert_relative_eq!(log_normal_cdf(0.0), 0.5f64.ln(), epsilon = 1e-15);
        // Φ(−1.959963984540054) = 0.025
        assert_relative_eq!(log_normal_cdf(-1.959963984540054), 0.025f64.ln(), epsilon = 1e-9);
        let (a, b) = (log_normal_cdf(-35.0 + 1e-9), log_normal_cdf(-35.0 - 1e-9));
        assert!((a - b).abs() < 1e-6);
        assert!(log_normal_cdf(-100.0).is_finite());
        assert!(log_normal_cdf(40.0).abs() < 1e-300);
    }

    #[test]
    fn zero_slant_reduces_to_gaussian() {
        let cov = DMatrix::from_row_slice(2, 2, &[0.8, -0.4, -0.4, 0.8]);
        let sn = SkewNormalComponent::new(vec![0.5, -1.0], cov.clone(), vec![0.0, 0.0]).unwrap();
        let g = GaussianComponent::new(vec![0.5, -1.0], cov).unwrap();
        for x in [[0.0, 0.0], [1.0, -2.0], [3.0, 1.5]] {
            assert_relative_eq!(sn.ln_pdf(&x), g.lpdf(&x), epsilon = 1e-12);
        }
    }

    #[test]
    fn univariate_density_matches_azzalini_form() {
        // d = 1: Y = δ|U₀| + U has density 2/ω φ(y/ω) Φ(a y/ω), ω² = 1 + δ², a = δ.
        let delta = 2.0;
        let sn = SkewNormalComponent::new(vec![0.0], DMatrix::from_element(1, 1, 1.0), vec![delta]).unwrap();
        let omega = (1.0f64 + delta * delta).sqrt();
        for y in [-2.0, -0.3, 0.0, 0.7, 2.5] {
            let z = y / omega;
            let phi = (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
            let cdf = 0.5 * erfc(-delta * z / std::f64::consts::SQRT_2);
            assert_relative_eq!(sn.ln_pdf(&[y]), (2.0 / omega * phi * cdf).ln(), epsilon = 1e-12);
        }
    }
}
