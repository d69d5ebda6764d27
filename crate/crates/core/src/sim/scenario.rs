use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::skew::SkewNormalComponent;
use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::eval::IseGrid;
use crate::mixture::{lse, CovarianceStructure, GaussianComponent, GaussianMixture, LogDensity};
use crate::rng::stream_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ScenarioId {
    M1,
    M2,
    M3,
    M4,
    M5,
}

impl ScenarioId {
    pub const ALL: [ScenarioId; 5] = [Self::M1, Self::M2, Self::M3, Self::M4, Self::M5];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::M1 => "M1",
            Self::M2 => "M2",
            Self::M3 => "M3",
            Self::M4 => "M4",
            Self::M5 => "M5",
        }
    }
}

impl fmt::Display for ScenarioId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScenarioId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|id| id.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Parse(format!("unknown scenario '{s}' (expected M1..M5)")))
    }
}

/// One generating component of a scenario.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScenarioComponent {
    Gaussian {
        mean: Vec<f64>,
        covariance: Vec<Vec<f64>>,
        #[serde(skip)]
        cached: GaussianComponent,
        #[serde(skip)]
        chol: DMatrix<f64>,
    },
    SkewNormal(SkewNormalComponent),
}

impl ScenarioComponent {
    pub fn gaussian(mean: Vec<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let cached = GaussianComponent::new(mean.clone(), cov.clone())?;
        let d = mean.len();
        Ok(Self::Gaussian {
            covariance: (0..d).map(|i| cov.row(i).iter().copied().collect()).collect(),
            chol: cov.cholesky().expect("checked positive definite").l(),
            mean,
            cached,
        })
    }

    fn ln_pdf(&self, x: &[f64]) -> f64 {
        match self {
            Self::Gaussian { cached, .. } => cached.lpdf(x),
            Self::SkewNormal(s) => s.ln_pdf(x),
        }
    }

    fn mean(&self) -> Vec<f64> {
        match self {
            Self::Gaussian { mean, .. } => mean.clone(),
            Self::SkewNormal(s) => s.mean(),
        }
    }

    fn covariance(&self) -> DMatrix<f64> {
        match self {
            Self::Gaussian { cached, .. } => cached.covariance().clone(),
            Self::SkewNormal(s) => s.covariance(),
        }
    }

    fn sample(&self, rng: &mut crate::rng::Rng) -> Vec<f64> {
        match self {
            Self::Gaussian { mean, chol, .. } => {
                let z = DVector::from_fn(mean.len(), |_, _| rng.sample::<f64, _>(StandardNormal));
                let y = chol * z;
                mean.iter().zip(y.iter()).map(|(m, v)| m + v).collect()
            }
            Self::SkewNormal(s) => s.sample(rng),
        }
    }
}

/// A bivariate generating density of the simulation study.
#[derive(Debug, Clone, Serialize)]
pub struct ScenarioSpec {
    pub id: ScenarioId,
    pub weights: Vec<f64>,
    pub components: Vec<ScenarioComponent>,
}

fn sym2(a: f64, b: f64) -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[a, b, b, a])
}

impl ScenarioSpec {
    pub fn new(id: ScenarioId) -> Self {
        let g = |m: [f64; 2], a, b| ScenarioComponent::gaussian(m.to_vec(), sym2(a, b)).expect("valid table");
        let sn = |m: [f64; 2], d: [f64; 2]| {
            ScenarioComponent::SkewNormal(
                SkewNormalComponent::new(m.to_vec(), sym2(0.8, -0.4), d.to_vec()).expect("valid table"),
            )
        };
        let (weights, components) = match id {
            ScenarioId::M1 => (vec![1.0], vec![g([0.0, 0.0], 1.25, 0.75)]),
            ScenarioId::M2 => (
                vec![0.5, 0.5],
                vec![g([-0.53, -0.53], 0.68, -0.41), g([0.53, 0.53], 0.68, -0.41)],
            ),
            ScenarioId::M3 => (
                vec![0.4, 0.4, 0.2],
                vec![
                    g([-0.85, -0.85], 0.58, -0.35),
                    g([0.85, 0.85], 0.58, -0.35),
                    g([0.0, 0.0], 0.16, -0.09),
                ],
            ),
            ScenarioId::M4 => (vec![1.0], vec![sn([0.0, 0.0], [3.0, 3.0])]),
            ScenarioId::M5 => (
                vec![0.5, 0.5],
                vec![sn([1.0, 1.0], [3.0, 3.0]), sn([-1.0, -1.0], [-3.0, -3.0])],
            ),
        };
        Self { id, weights, components }
    }

    pub fn k(&self) -> usize {
        self.components.len()
    }

    /// The equivalent Gaussian mixture, for the purely Gaussian scenarios.
    pub fn as_gaussian_mixture(&self) -> Option<GaussianMixture> {
        let comps = self
            .components
            .iter()
            .map(|c| match c {
                ScenarioComponent::Gaussian { cached, .. } => Some(cached.clone()),
                ScenarioComponent::SkewNormal(_) => None,
            })
            .collect::<Option<Vec<_>>>()?;
        GaussianMixture::new(self.weights.clone(), comps, CovarianceStructure::VVV).ok()
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; 2];
        for (w, c) in self.weights.iter().zip(&self.components) {
            for (acc, v) in m.iter_mut().zip(c.mean()) {
                *acc += w * v;
            }
        }
        m
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        let mean = DVector::from_vec(self.mean());
        let mut cov = DMatrix::zeros(2, 2);
        for (w, c) in self.weights.iter().zip(&self.components) {
            let diff = DVector::from_vec(c.mean()) - &mean;
            cov += (c.covariance() + &diff * diff.transpose()) * *w;
        }
        cov
    }

    pub fn marginal_sd(&self) -> Vec<f64> {
        let c = self.covariance();
        (0..2).map(|i| c[(i, i)].sqrt()).collect()
    }

    /// Square grid spanning ±6 marginal standard deviations.
    pub fn ise_grid(&self, resolution: usize) -> Result<IseGrid> {
        IseGrid::around(&self.mean(), &self.marginal_sd(), 6.0, resolution)
    }

    pub fn true_log_density(&self, x: &[f64]) -> f64 {
        let mut terms = [0.0; 3];
        for (t, (w, c)) in terms.iter_mut().zip(self.weights.iter().zip(&self.components)) {
            *t = w.ln() + c.ln_pdf(x);
        }
        lse(&terms[..self.k()])
    }

    /// `n` draws with their 1-based generating component labels.
    pub fn sample(&self, n: usize, seed: u64) -> (DataMatrix, Vec<usize>) {
        let mut rng = stream_rng(seed, 0);
        let mut values = Vec::with_capacity(2 * n);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let u: f64 = rng.random();
            let mut k = 0;
            let mut acc = self.weights[0];
            while u >= acc && k + 1 < self.k() {
                k += 1;
                acc += self.weights[k];
            }
            values.extend(self.components[k].sample(&mut rng));
            labels.push(k + 1);
        }
        (DataMatrix::new(values, n, 2).expect("finite draws"), labels)
    }
}

impl LogDensity for ScenarioSpec {
    fn dim(&self) -> usize {
        2
    }

    fn ln_density(&self, x: &[f64]) -> f64 {
        self.true_log_density(x)
    }
}

pub fn sample_scenario(spec: &ScenarioSpec, n: usize, seed: u64) -> (DataMatrix, Vec<usize>) {
    spec.sample(n, seed)
}

pub fn true_log_density(spec: &ScenarioSpec, x: &[f64]) -> f64 {
    spec.true_log_density(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mixture::mixture_log_density;
    use approx::assert_relative_eq;

    #[test]
    fn parameters_serialize_as_tabled() {
        let json = serde_json::to_value(ScenarioSpec::new(ScenarioId::M3)).unwrap();
        assert_eq!(json["weights"], serde_json::json!([0.4, 0.4, 0.2]));
        assert_eq!(json["components"][2]["covariance"], serde_json::json!([[0.16, -0.09], [-0.09, 0.16]]));
        assert_eq!(json["components"][0]["mean"], serde_json::json!([-0.85, -0.85]));
        let m5 = serde_json::to_value(ScenarioSpec::new(ScenarioId::M5)).unwrap();
        assert_eq!(m5["components"][1]["kind"], "skew_normal");
        assert_eq!(m5["components"][1]["slant"], serde_json::json!([-3.0, -3.0]));
        assert_eq!(m5["components"][1]["location"], serde_json::json!([-1.0, -1.0]));
        assert_eq!(m5["components"][0]["scale"], serde_json::json!([[0.8, -0.4], [-0.4, 0.8]]));
    }

    #[test]
    fn m1_density_at_mean() {
        let det: f64 = 1.25 * 1.25 - 0.75 * 0.75;
        let expect = -(2.0 * std::f64::consts::PI).ln() - 0.5 * det.ln();
        assert_relative_eq!(ScenarioSpec::new(ScenarioId::M1).true_log_density(&[0.0, 0.0]), expect, epsilon = 1e-12);
    }

    #[test]
    fn m2_matches_gaussian_mixture() {
        let spec = ScenarioSpec::new(ScenarioId::M2);
        let gm = spec.as_gaussian_mixture().unwrap();
        for x in [[0.0, 0.0], [0.3, -1.2]] {
            assert_relative_eq!(spec.true_log_density(&x), mixture_log_density(&x, &gm).unwrap(), epsilon = 1e-12);
        }
        assert!(ScenarioSpec::new(ScenarioId::M4).as_gaussian_mixture().is_none());
    }

    #[test]
    fn every_scenario_integrates_to_one() {
        for id in ScenarioId::ALL {
            let spec = ScenarioSpec::new(id);
            let mean = spec.mean();
            let grid = IseGrid::around(&mean, &spec.marginal_sd(), 8.0, 400).unwrap();
            let mass = grid.integrate(|x| spec.true_log_density(x).exp());
            assert!((mass - 1.0).abs() < 1e-3, "{id}: {mass}");
        }
    }

    #[test]
    fn sampling_is_seed_deterministic() {
        let spec = ScenarioSpec::new(ScenarioId::M5);
        let (a, la) = spec.sample(50, 9);
        let (b, lb) = spec.sample(50, 9);
        assert_eq!(a, b);
        assert_eq!(la, lb);
        assert_ne!(spec.sample(50, 10).0, a);
    }

    #[test]
    fn scenario_ids_parse() {
        assert_eq!("m4".parse::<ScenarioId>().unwrap(), ScenarioId::M4);
        assert!("M6".parse::<ScenarioId>().is_err());
    }
}
