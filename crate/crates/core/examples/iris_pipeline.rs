//! Full pipeline on Fisher's iris data: fit the grid, weight the top models
//! with the BIC-type penalty, and cluster by modal EM.
//!
//! cargo run --release --example iris_pipeline

use std::path::Path;

use ensdens::eval::adjusted_rand_index;
use ensdens::fit::{fit_grid, map_classify, FitConfig};
use ensdens::io::{read_data_csv, read_labels};
use ensdens::modal::{MemOptions, ModalClustering};
use ensdens::weights::{fit_weights, lambda_bic, LogDensityMatrix, PenaltySpec, WeightFitOptions, WeightInit};
use ensdens::EnsembleDensity;

fn main() -> ensdens::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    let data = read_data_csv(&dir.join("iris.csv"), true)?;
    let species = read_labels(&dir.join("iris_species.csv"), true)?;

    let pool = fit_grid(&data, &FitConfig::default())?;
    let best = pool.best().expect("at least one model");
    println!("{} models fitted; BIC-best: K={} {} (BIC {:.2})", pool.len(), best.k(), best.structure(), best.bic().unwrap());
    for (i, m) in pool.selected().iter().take(5).enumerate() {
        println!("  #{:<2} K={} {} BIC {:.2}", i + 1, m.k(), m.structure(), m.bic().unwrap());
    }

    let single = map_classify(&data, best)?;
    println!("single best model: K̂={} ARI={:.3}", single.k_hat(), adjusted_rand_index(&species, &single.labels)?);

    let density = LogDensityMatrix::from_models(&data, pool.selected())?;
    let penalty = PenaltySpec::new(lambda_bic(data.n()), pool.nu())?;
    let fit = fit_weights(&density, &penalty, &WeightInit::Uniform, &WeightFitOptions::default())?;
    println!("λ_BIC = {:.3}; non-negligible weights:", fit.lambda);
    for (m, a) in pool.selected().iter().zip(&fit.alpha) {
        if *a > 1e-3 {
            println!("  K={} {} α={a:.3}", m.k(), m.structure());
        }
    }

    let ensemble = EnsembleDensity::new(pool.selected().to_vec(), fit.alpha)?;
    let partition = ModalClustering::fit(&data, &ensemble, None, MemOptions::default())?.into_partition();
    println!(
        "ensemble + modal EM: K̂={} ARI={:.3}",
        partition.k_hat(),
        adjusted_rand_index(&species, &partition.labels)?
    );
    for (label, mode) in partition.modes.iter().enumerate() {
        println!("  cluster {}: {} points, mode {:.2?}", label + 1, mode.basin_size, mode.location);
    }
    Ok(())
}
