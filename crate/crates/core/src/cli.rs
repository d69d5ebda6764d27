//! The `ensdens` command line. Every stage reads and writes plain files so
//! the stages compose in shell pipelines.

use std::ffi::OsString;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::{usage, Error, Result};
use crate::eval::{adjusted_rand_index, read_results_csv, summarize, write_results_csv, ContingencyTable};
use crate::fit::{fit_grid, CellStatus, FitConfig};
use crate::io::{
    read_data_csv, read_json, read_labels, write_density_grid, write_json, MetricsArtifact, PartitionArtifact,
    PoolArtifact, WeightsArtifact, SCHEMA_VERSION,
};
use crate::mixture::{CovarianceStructure, EnsembleDensity};
use crate::modal::{MemOptions, ModalClustering};
use crate::sim::{run_experiment, ExperimentPlan};
use crate::weights::{
    fit_weights, lambda_aic, lambda_bic, lambda_cv_matrix, CvConfig, LogDensityMatrix, PenaltySpec,
    WeightFitOptions, WeightInit,
};

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "ENSDENS_THREADS";

#[derive(Debug, Parser)]
#[command(name = "ensdens", version, about = "Ensemble model-based clustering")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the (K, structure) grid and write the BIC-ranked pool.
    Fit(FitArgs),
    /// Estimate penalized ensemble weights for a pool.
    Ensemble(EnsembleArgs),
    /// Partition the data by modal EM on the ensemble density.
    Cluster(ClusterArgs),
    /// Run a Monte Carlo experiment described by a TOML plan.
    Simulate(SimulateArgs),
    /// Compare a partition with reference labels.
    Evaluate(EvaluateArgs),
    /// Summarize a results CSV into MISE/ARI tables.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Numeric CSV, one observation per row.
    #[arg(long)]
    pub data: PathBuf,
    /// The data file starts with a header row.
    #[arg(long)]
    pub header: bool,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub input: DataArgs,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub k_min: usize,
    #[arg(long, default_value_t = 9)]
    pub k_max: usize,
    /// Comma-separated covariance structures.
    #[arg(long, value_delimiter = ',', default_value = "EII,VII,EEI,VVI,EEE,VVV")]
    pub structures: Vec<CovarianceStructure>,
    /// Number of top-BIC models kept for the ensemble.
    #[arg(long, default_value_t = 30)]
    pub ensemble_size: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 500)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long, default_value_t = 5)]
    pub n_init: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PenaltyChoice {
    Aic,
    Bic,
    Cv,
}

#[derive(Debug, Args)]
pub struct EnsembleArgs {
    #[arg(long)]
    pub pool: PathBuf,
    #[command(flatten)]
    pub input: DataArgs,
    #[arg(long, value_enum, default_value = "bic")]
    pub penalty: PenaltyChoice,
    /// Fixed penalty strength; overrides --penalty.
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long, default_value_t = 5)]
    pub cv_folds: usize,
    /// Log-spaced λ grid for cross-validation, as `min:max:count`.
    #[arg(long)]
    pub cv_grid: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Override the number of models combined.
    #[arg(long)]
    pub ensemble_size: Option<usize>,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct ClusterArgs {
    #[arg(long)]
    pub pool: PathBuf,
    #[arg(long)]
    pub weights: PathBuf,
    #[command(flatten)]
    pub input: DataArgs,
    /// Distance below which ascent endpoints share a mode.
    #[arg(long)]
    pub merge_tol: Option<f64>,
    #[arg(long, default_value_t = 10_000)]
    pub max_ascend_iter: usize,
    /// Nodes per axis of the density grid written for 2-D data.
    #[arg(long, default_value_t = 100)]
    pub grid_resolution: usize,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// TOML plan file.
    #[arg(long)]
    pub plan: PathBuf,
    /// Overrides the plan seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the plan's number of replicates.
    #[arg(long)]
    pub replicates: Option<usize>,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub partition: PathBuf,
    /// One reference label per row.
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long)]
    pub header: bool,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub results: PathBuf,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

/// Process exit code for an error: 2 for bad input, 1 for pipeline failures.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Usage(_) | Error::Parse(_) | Error::Json(_) | Error::Csv(_) => 2,
        Error::Io(e) if e.kind() == std::io::ErrorKind::NotFound => 2,
        _ => 1,
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match configure_threads().and_then(|_| execute(cli)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("ensdens: {e}");
            exit_code(&e)
        }
    }
}

fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = match raw.trim().parse() {
        Ok(t) if t > 0 => t,
        _ => return usage(format!("{THREADS_ENV} must be a positive integer, got '{raw}'")),
    };
    // A pool already built by an earlier call in this process is kept.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    Ok(())
}

pub fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Fit(a) => cmd_fit(&a),
        Command::Ensemble(a) => cmd_ensemble(&a),
        Command::Cluster(a) => cmd_cluster(&a),
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Evaluate(a) => cmd_evaluate(&a),
        Command::Report(a) => cmd_report(&a),
    }
}

fn out_path(dir: &Path, name: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    Ok(dir.join(name))
}

pub fn cmd_fit(a: &FitArgs) -> Result<()> {
    let data = read_data_csv(&a.input.data, a.input.header)?;
    let config = FitConfig {
        k_range: a.k_min..=a.k_max,
        structures: a.structures.clone(),
        max_iter: a.max_iter,
        rel_tol: a.tol,
        n_init: a.n_init,
        seed: a.seed,
        ensemble_size: a.ensemble_size,
    };
    let pool = fit_grid(&data, &config)?;
    write_json(&out_path(&a.out_dir, "pool.json")?, &PoolArtifact::from_pool(&pool))?;

    let mut w = csv::Writer::from_path(out_path(&a.out_dir, "fit_report.csv")?)?;
    w.write_record(["K", "structure", "status", "loglik", "bic", "nu", "reason"])?;
    for c in pool.cells() {
        let (k, s) = (c.k.to_string(), c.structure.to_string());
        match &c.status {
            CellStatus::Fitted { loglik, bic, nu } => {
                w.write_record([&k, &s, "fitted", &loglik.to_string(), &bic.to_string(), &nu.to_string(), ""])?
            }
            CellStatus::Failed { reason } => w.write_record([&k, &s, "failed", "", "", "", reason])?,
        }
    }
    w.flush()?;
    let best = pool.best().expect("non-empty pool");
    eprintln!(
        "fitted {} of {} cells; best BIC {:.3} at K={} {}",
        pool.len(),
        pool.cells().len(),
        best.bic().unwrap_or(f64::NAN),
        best.k(),
        best.structure()
    );
    Ok(())
}

fn parse_cv_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || Error::Usage(format!("--cv-grid expects min:max:count, got '{spec}'"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo: f64 = parts[0].parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].parse().map_err(|_| bad())?;
    let count: usize = parts[2].parse().map_err(|_| bad())?;
    if !(lo > 0.0 && hi >= lo && count >= 1) || (count > 1 && hi == lo) {
        return Err(bad());
    }
    if count == 1 {
        return Ok(vec![lo]);
    }
    let (a, b) = (lo.ln(), hi.ln());
    Ok((0..count)
        .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
        .collect())
}

pub fn cmd_ensemble(a: &EnsembleArgs) -> Result<()> {
    let data = read_data_csv(&a.input.data, a.input.header)?;
    let mut pool = read_json::<PoolArtifact>(&a.pool)?.into_pool()?;
    if let Some(m) = a.ensemble_size {
        if m == 0 {
            return usage("--ensemble-size must be at least 1");
        }
        pool = pool.with_ensemble_size(m);
    }
    let d = pool.best().map_or(0, |m| m.dim());
    if d != data.dim() {
        return usage(format!("pool dimension {d} differs from data dimension {}", data.dim()));
    }
    let density = LogDensityMatrix::from_models(&data, pool.selected())?;
    let nu = pool.nu();
    let mut cv = None;
    let (label, lambda) = match (a.lambda, a.penalty) {
        (Some(l), _) => ("manual", l),
        (None, PenaltyChoice::Aic) => ("aic", lambda_aic()),
        (None, PenaltyChoice::Bic) => ("bic", lambda_bic(data.n())),
        (None, PenaltyChoice::Cv) => {
            let mut config = CvConfig::with_defaults(data.n(), a.seed);
            config.folds = a.cv_folds;
            if let Some(g) = &a.cv_grid {
                config.lambda_grid = parse_cv_grid(g)?;
            }
            let outcome = lambda_cv_matrix(&density, &nu, &config)?;
            let l = outcome.lambda;
            cv = Some(outcome);
            ("cv", l)
        }
    };
    let penalty = PenaltySpec::new(lambda, nu)?;
    let fit = fit_weights(&density, &penalty, &WeightInit::Uniform, &WeightFitOptions::default())?;
    eprintln!(
        "λ = {:.3} ({label}); {} of {} models kept",
        fit.lambda,
        fit.alpha.len() - fit.dropped_models.len(),
        fit.alpha.len()
    );
    let artifact = WeightsArtifact {
        schema_version: SCHEMA_VERSION,
        penalty: label.into(),
        fit,
        cv,
    };
    write_json(&out_path(&a.out_dir, "weights.json")?, &artifact)
}

pub fn cmd_cluster(a: &ClusterArgs) -> Result<()> {
    let data = read_data_csv(&a.input.data, a.input.header)?;
    let weights: WeightsArtifact = read_json(&a.weights)?;
    let pool = read_json::<PoolArtifact>(&a.pool)?
        .into_pool()?
        .with_ensemble_size(weights.fit.alpha.len());
    if pool.selected().len() != weights.fit.alpha.len() {
        return usage("weights file does not match the pool");
    }
    let ens = EnsembleDensity::new(pool.selected().to_vec(), weights.fit.alpha.clone())?;
    if ens.dim() != data.dim() {
        return usage("pool and data dimensions differ");
    }
    let opts = MemOptions {
        max_iter: a.max_ascend_iter,
        ..MemOptions::default()
    };
    let clustering = ModalClustering::fit(&data, &ens, a.merge_tol, opts)?;
    let partition = clustering.into_partition();
    for w in &partition.warnings {
        log::warn!("{w}");
    }
    eprintln!("{} clusters", partition.k_hat());

    if data.dim() == 2 && a.grid_resolution >= 2 {
        let bounds: Vec<(f64, f64)> = (0..2)
            .map(|j| {
                let col = data.rows().map(|r| r[j]);
                let (lo, hi) = col.fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(v), h.max(v)));
                let pad = 0.1 * (hi - lo).max(1e-12);
                (lo - pad, hi + pad)
            })
            .collect();
        let out = BufWriter::new(File::create(out_path(&a.out_dir, "density_grid.csv")?)?);
        write_density_grid(&ens.flatten(), [bounds[0], bounds[1]], a.grid_resolution, out)?;
    }
    write_json(
        &out_path(&a.out_dir, "partition.json")?,
        &PartitionArtifact {
            schema_version: SCHEMA_VERSION,
            partition,
        },
    )
}

pub fn cmd_simulate(a: &SimulateArgs) -> Result<()> {
    let mut plan = ExperimentPlan::from_toml(&std::fs::read_to_string(&a.plan)?)?;
    if let Some(s) = a.seed {
        plan.seed = s;
    }
    if let Some(b) = a.replicates {
        plan.replicates = b;
    }
    let rows = run_experiment(&plan)?;
    let results = match &plan.results {
        Some(p) => p.clone(),
        None => out_path(&a.out_dir, "results.csv")?,
    };
    let summary = match &plan.summary {
        Some(p) => p.clone(),
        None => out_path(&a.out_dir, "summary.json")?,
    };
    write_results_csv(&rows, BufWriter::new(File::create(&results)?))?;
    write_json(&summary, &summarize(&rows))?;
    eprintln!("{} result rows written to {}", rows.len(), results.display());
    Ok(())
}

pub fn cmd_evaluate(a: &EvaluateArgs) -> Result<()> {
    let partition = read_json::<PartitionArtifact>(&a.partition)?.partition;
    let truth = read_labels(&a.truth, a.header)?;
    let ari = adjusted_rand_index(&truth, &partition.labels)?;
    let contingency = ContingencyTable::new(&truth, &partition.labels)?;
    let metrics = MetricsArtifact {
        schema_version: SCHEMA_VERSION,
        n: truth.len(),
        ari,
        k_hat: contingency.col_labels.len(),
        k_true: contingency.row_labels.len(),
        contingency,
    };
    println!("ARI {ari:.4}  K̂ {}  K {}", metrics.k_hat, metrics.k_true);
    write_json(&out_path(&a.out_dir, "metrics.json")?, &metrics)
}

pub fn cmd_report(a: &ReportArgs) -> Result<()> {
    let rows = read_results_csv(File::open(&a.results)?)?;
    let summary = summarize(&rows);
    for s in &summary.scenarios {
        for size in &s.sizes {
            println!("{} n={}", s.scenario, size.n);
            for m in &size.methods {
                let fmt = |v: Option<crate::eval::MiseSummary>| {
                    v.map_or("-".to_string(), |s| format!("{:.3} ({:.3})", s.mean, s.sd))
                };
                println!("  {:<6} MISE×1000 {:<18} ARI {}", m.method, fmt(m.mise_x1000), fmt(m.ari));
            }
        }
    }
    write_json(&out_path(&a.out_dir, "summary.json")?, &summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cv_grid_parsing() {
        let g = parse_cv_grid("0.1:10:3").unwrap();
        assert_eq!(g.len(), 3);
        assert!((g[1] - 1.0).abs() < 1e-12);
        assert_eq!(parse_cv_grid("2:2:1").unwrap(), vec![2.0]);
        for bad in ["1:2", "0:1:3", "3:1:4", "a:b:c"] {
            assert!(parse_cv_grid(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn error_classes_map_to_exit_codes() {
        assert_eq!(exit_code(&Error::Usage("x".into())), 2);
        assert_eq!(exit_code(&Error::Parse("x".into())), 2);
        assert_eq!(exit_code(&Error::Pipeline("x".into())), 1);
        assert_eq!(exit_code(&Error::FitFailure("x".into())), 1);
    }

    #[test]
    fn help_exits_zero_and_unknown_flags_two() {
        assert_eq!(main_with_args(["ensdens", "--help"]), 0);
        assert_eq!(main_with_args(["ensdens", "fit", "--bogus"]), 2);
    }
}
