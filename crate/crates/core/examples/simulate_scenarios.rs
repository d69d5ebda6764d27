//! A small Monte Carlo run over the generating scenarios, written as a
//! results table and summarized the way the experiment tables are.
//!
//! cargo run --release --example simulate_scenarios

use ensdens::eval::{summarize, write_results_csv};
use ensdens::sim::{run_experiment, ExperimentPlan, ScenarioId, ScenarioSpec};

fn main() -> ensdens::Result<()> {
    for id in ScenarioId::ALL {
        let spec = ScenarioSpec::new(id);
        let (_, labels) = spec.sample(10_000, 1);
        let share: Vec<f64> = (1..=spec.k())
            .map(|k| labels.iter().filter(|l| **l == k).count() as f64 / labels.len() as f64)
            .collect();
        println!(
            "{id}: mean {:.3?}, sd {:.3?}, component shares {:.3?}",
            spec.mean(),
            spec.marginal_sd(),
            share
        );
    }

    let plan = ExperimentPlan::from_toml(
        r#"
scenarios = ["M1", "M2"]
B = 2
n = [200]
methods = ["SB", "SB-NP", "BIC"]
seed = 7
k_max = 4
ensemble_size = 10
ise_resolution = 150
"#,
    )?;
    let rows = run_experiment(&plan)?;
    write_results_csv(&rows, std::io::stdout())?;
    for scenario in summarize(&rows).scenarios {
        for size in scenario.sizes {
            for m in size.methods {
                let ari = m.ari.map_or(f64::NAN, |s| s.mean);
                let mise = m.mise_x1000.map_or(f64::NAN, |s| s.mean);
                println!("{} n={} {:<6} MISE×1000 {mise:.3}  ARI {ari:.3}", scenario.scenario, size.n, m.method);
            }
        }
    }
    Ok(())
}
