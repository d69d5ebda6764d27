//! Partition agreement and density accuracy.

mod ari;
mod ise;
mod report;

pub use ari::{adjusted_rand_index, ContingencyTable};
pub use ise::{ise, ise_monte_carlo, IseGrid};
pub use report::{
    mise_summary, read_results_csv, summarize, write_results_csv, MethodSummary, MiseSummary,
    ResultRow, ScenarioSummary, SizeSummary, Summary,
};
