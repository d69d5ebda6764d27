//! Scenario densities M1–M5 and the Monte Carlo experiment harness.

mod experiment;
mod scenario;
mod skew;

pub use experiment::{run_experiment, ExperimentPlan, Method, MethodOutcome, ReplicateContext};
pub use scenario::{sample_scenario, true_log_density, ScenarioComponent, ScenarioId, ScenarioSpec};
pub use skew::{log_normal_cdf, SkewNormalComponent};
