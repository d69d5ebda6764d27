//! Fit the (K, covariance structure) grid on a sample from scenario M2 and
//! show the BIC ranking, the per-cell report and an Occam's window.
//!
//! cargo run --release --example fit_grid

use ensdens::fit::{fit_grid, occam_window, CellStatus, FitConfig};
use ensdens::sim::{ScenarioId, ScenarioSpec};

fn main() -> ensdens::Result<()> {
    let (data, _) = ScenarioSpec::new(ScenarioId::M2).sample(400, 11);
    let config = FitConfig {
        k_range: 1..=5,
        ensemble_size: 10,
        seed: 3,
        ..FitConfig::default()
    };
    let pool = fit_grid(&data, &config)?;

    println!("rank  K  structure      BIC      nu");
    for (rank, m) in pool.models().iter().enumerate() {
        let mark = if rank < pool.ensemble_size() { '*' } else { ' ' };
        println!("{mark}{:>3}  {}  {:<9} {:>9.2} {:>6}", rank + 1, m.k(), m.structure(), m.bic().unwrap(), m.nu());
    }
    let failed = pool
        .cells()
        .iter()
        .filter(|c| matches!(c.status, CellStatus::Failed { .. }))
        .count();
    println!("{} cells fitted, {failed} failed; * marks the {} models kept", pool.len(), pool.ensemble_size());

    let window = occam_window(&pool, 10.0);
    println!("Occam's window (BIC within 10 of the best) keeps {} models", window.len());
    Ok(())
}
