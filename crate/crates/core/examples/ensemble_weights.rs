//! Penalized ensemble weights under the AIC- and BIC-type penalties, and
//! the single mixture obtained by flattening the ensemble.
//!
//! cargo run --release --example ensemble_weights

use ensdens::fit::{fit_grid, FitConfig};
use ensdens::sim::{ScenarioId, ScenarioSpec};
use ensdens::weights::{
    fit_weights, lambda_aic, lambda_bic, LogDensityMatrix, PenaltySpec, WeightFitOptions, WeightInit,
};
use ensdens::EnsembleDensity;

fn main() -> ensdens::Result<()> {
    let (data, _) = ScenarioSpec::new(ScenarioId::M5).sample(500, 2);
    let pool = fit_grid(&data, &FitConfig { k_range: 1..=6, ..FitConfig::default() })?;
    let density = LogDensityMatrix::from_models(&data, pool.selected())?;

    for (name, lambda) in [("none", 0.0), ("AIC", lambda_aic()), ("BIC", lambda_bic(data.n()))] {
        let penalty = PenaltySpec::new(lambda, pool.nu())?;
        let fit = fit_weights(&density, &penalty, &WeightInit::Uniform, &WeightFitOptions::default())?;
        println!(
            "{name:>4}: λ={lambda:.3} loglik={:.2} penalized={:.2} iterations={} kept {} of {}",
            fit.loglik,
            fit.penalized_loglik,
            fit.iterations,
            fit.alpha.len() - fit.dropped_models.len(),
            fit.alpha.len()
        );
        for (m, a) in pool.selected().iter().zip(&fit.alpha).filter(|(_, a)| **a > 0.01) {
            println!("        K={} {:<3} ν={:>2} α={a:.3}", m.k(), m.structure(), m.nu());
        }
        if name == "BIC" {
            let ensemble = EnsembleDensity::new(pool.selected().to_vec(), fit.alpha)?;
            let flat = ensemble.flatten();
            let x = [0.5, 0.5];
            println!(
                "flattened: {} components; log f(0.5, 0.5) = {:.6} (ensemble {:.6})",
                flat.k(),
                flat.log_density(&x)?,
                ensemble.log_density(&x)?
            );
        }
    }
    Ok(())
}
