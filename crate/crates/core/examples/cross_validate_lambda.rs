//! Choose the penalty strength by V-fold cross-validation of the held-out
//! ensemble log-likelihood.
//!
//! cargo run --release --example cross_validate_lambda

use ensdens::fit::{fit_grid, FitConfig};
use ensdens::sim::{ScenarioId, ScenarioSpec};
use ensdens::weights::{lambda_bic, lambda_cv, CvConfig};

fn main() -> ensdens::Result<()> {
    let (data, _) = ScenarioSpec::new(ScenarioId::M3).sample(500, 5);
    let pool = fit_grid(&data, &FitConfig { k_range: 1..=6, ensemble_size: 15, ..FitConfig::default() })?;
    let cv = CvConfig {
        folds: 5,
        lambda_grid: vec![0.01, 0.1, 0.5, 1.0, lambda_bic(data.n()), 10.0, 100.0],
        seed: 42,
    };
    let outcome = lambda_cv(&data, &pool, &cv)?;
    println!("       λ   held-out log-likelihood");
    for row in &outcome.table {
        let mark = if row.lambda == outcome.lambda { "<-" } else { "" };
        println!("{:>8.3}   {:>12.3} {mark}", row.lambda, row.test_loglik);
    }
    println!("λ_CV = {:.3}", outcome.lambda);

    let default_grid = CvConfig::with_defaults(data.n(), 42);
    println!(
        "default grid: {} log-spaced values in [{:.2}, {:.2}] -> λ_CV = {:.3}",
        default_grid.lambda_grid.len(),
        default_grid.lambda_grid[0],
        default_grid.lambda_grid.last().unwrap(),
        lambda_cv(&data, &pool, &default_grid)?.lambda
    );
    Ok(())
}
