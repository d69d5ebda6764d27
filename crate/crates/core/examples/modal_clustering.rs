//! Modal EM on an ensemble density: ascent paths, the merged modes, and
//! labels for new points.
//!
//! cargo run --release --example modal_clustering

use ensdens::eval::adjusted_rand_index;
use ensdens::fit::{fit_grid, map_classify, FitConfig};
use ensdens::modal::{MemOptions, ModalClustering};
use ensdens::sim::{ScenarioId, ScenarioSpec};
use ensdens::weights::{fit_weights, lambda_bic, LogDensityMatrix, PenaltySpec, WeightFitOptions, WeightInit};
use ensdens::{DataMatrix, EnsembleDensity};

fn main() -> ensdens::Result<()> {
    // Two skewed groups that a single Gaussian mixture tends to over-split.
    let (data, truth) = ScenarioSpec::new(ScenarioId::M5).sample(600, 8);
    let pool = fit_grid(&data, &FitConfig { k_range: 1..=6, ..FitConfig::default() })?;
    let density = LogDensityMatrix::from_models(&data, pool.selected())?;
    let penalty = PenaltySpec::new(lambda_bic(data.n()), pool.nu())?;
    let fit = fit_weights(&density, &penalty, &WeightInit::Uniform, &WeightFitOptions::default())?;
    let ensemble = EnsembleDensity::new(pool.selected().to_vec(), fit.alpha)?;

    let clustering = ModalClustering::fit(&data, &ensemble, None, MemOptions::default())?;
    let partition = clustering.partition();
    println!("merge tolerance {:.4}", clustering.merge_tol());
    for (i, mode) in partition.modes.iter().enumerate() {
        println!(
            "mode {}: at {:.3?}, log density {:.3}, {} observations",
            i + 1,
            mode.location,
            mode.log_density,
            mode.basin_size
        );
    }
    let sb = map_classify(&data, pool.best().unwrap())?;
    println!("ARI ensemble+MEM {:.3}", adjusted_rand_index(&truth, &partition.labels)?);
    println!("ARI best model MAP {:.3} (K = {})", adjusted_rand_index(&truth, &sb.labels)?, sb.k_hat());

    let ascent = clustering.engine().ascend(&[3.0, 3.0], &MemOptions::default());
    println!(
        "ascent from (3, 3): {} steps to {:.3?}, converged: {}",
        ascent.iterations, ascent.point, ascent.converged
    );

    let new_points = DataMatrix::from_rows(&[[2.0, 2.0], [-2.0, -2.0], [0.0, 0.0]])?;
    println!("labels of new points: {:?}", clustering.predict(&new_points)?);
    Ok(())
}
