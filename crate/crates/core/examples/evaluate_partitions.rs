//! Agreement between partitions (adjusted Rand index, contingency table)
//! and the integrated squared error of a density estimate.
//!
//! cargo run --release --example evaluate_partitions

use ensdens::eval::{adjusted_rand_index, ise, ise_monte_carlo, mise_summary, ContingencyTable};
use ensdens::fit::{em_fit, map_classify, FitConfig};
use ensdens::sim::{ScenarioId, ScenarioSpec};
use ensdens::CovarianceStructure;

fn main() -> ensdens::Result<()> {
    let truth_labels = [1, 1, 1, 2, 2, 2, 3, 3, 3];
    let found = [2, 2, 2, 1, 1, 3, 3, 3, 3];
    println!("ARI = {:.4}", adjusted_rand_index(&truth_labels, &found)?);
    let table = ContingencyTable::new(&truth_labels, &found)?;
    for (label, row) in table.row_labels.iter().zip(&table.counts) {
        println!("  class {label}: {row:?}");
    }

    let spec = ScenarioSpec::new(ScenarioId::M3);
    let grid = spec.ise_grid(300)?;
    let mut errors = Vec::new();
    for replicate in 0..5 {
        let (data, truth) = spec.sample(500, replicate);
        let model = em_fit(&data, 3, CovarianceStructure::VVV, &FitConfig::default())?;
        let labels = map_classify(&data, &model)?.labels;
        let err = ise(&model, &spec, &grid)?;
        println!("replicate {replicate}: ISE×1000 {:.3}, ARI {:.3}", 1000.0 * err, adjusted_rand_index(&truth, &labels)?);
        errors.push(err);
        if replicate == 0 {
            let mc = ise_monte_carlo(&model, &spec, &grid.bounds, 200_000, 9)?;
            println!("  Monte Carlo check: ISE×1000 {:.3}", 1000.0 * mc);
        }
    }
    let summary = mise_summary(&errors)?.scaled(1000.0);
    println!("MISE×1000 = {:.3} (sd {:.3})", summary.mean, summary.sd);
    Ok(())
}
