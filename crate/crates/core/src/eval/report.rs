use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{usage, Result};

/// One (scenario, n, method, replicate) cell of a simulation run. Missing
/// values mean the method failed or does not produce that quantity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub scenario: String,
    pub n: usize,
    pub method: String,
    pub replicate: usize,
    pub ise: Option<f64>,
    pub ari: Option<f64>,
    pub k_hat: Option<usize>,
    pub lambda: Option<f64>,
    pub seed: u64,
}

pub fn write_results_csv<W: Write>(rows: &[ResultRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_results_csv<R: Read>(input: R) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_reader(input);
    let mut rows = Vec::new();
    for rec in r.deserialize() {
        rows.push(rec?);
    }
    Ok(rows)
}

/// Sample mean and standard deviation (divisor `B − 1`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MiseSummary {
    pub mean: f64,
    pub sd: f64,
    pub count: usize,
}

impl MiseSummary {
    pub fn scaled(self, factor: f64) -> Self {
        Self {
            mean: self.mean * factor,
            sd: self.sd * factor,
            count: self.count,
        }
    }
}

pub fn mise_summary(values: &[f64]) -> Result<MiseSummary> {
    if values.is_empty() {
        return usage("cannot summarize an empty vector");
    }
    let b = values.len() as f64;
    let mean = values.iter().sum::<f64>() / b;
    let sd = if values.len() > 1 {
        (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (b - 1.0)).sqrt()
    } else {
        0.0
    };
    Ok(MiseSummary {
        mean,
        sd,
        count: values.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    /// ISE summary multiplied by 1000.
    pub mise_x1000: Option<MiseSummary>,
    pub ari: Option<MiseSummary>,
    pub k_hat_mean: Option<f64>,
    pub lambda_mean: Option<f64>,
    pub replicates: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeSummary {
    pub n: usize,
    pub methods: Vec<MethodSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSummary {
    pub scenario: String,
    pub sizes: Vec<SizeSummary>,
}

/// Per-scenario, per-n, per-method table of MISE and ARI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schema_version: u32,
    pub scenarios: Vec<ScenarioSummary>,
}

fn first_seen<T: PartialEq + Clone>(items: impl Iterator<Item = T>) -> Vec<T> {
    let mut out: Vec<T> = Vec::new();
    for i in items {
        if !out.contains(&i) {
            out.push(i);
        }
    }
    out
}

fn mean_of(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Groups rows in order of first appearance.
pub fn summarize(rows: &[ResultRow]) -> Summary {
    let scenarios = first_seen(rows.iter().map(|r| r.scenario.clone()))
        .into_iter()
        .map(|scenario| {
            let in_s: Vec<&ResultRow> = rows.iter().filter(|r| r.scenario == scenario).collect();
            let sizes = first_seen(in_s.iter().map(|r| r.n))
                .into_iter()
                .map(|n| {
                    let in_n: Vec<&ResultRow> = in_s.iter().copied().filter(|r| r.n == n).collect();
                    let methods = first_seen(in_n.iter().map(|r| r.method.clone()))
                        .into_iter()
                        .map(|method| {
                            let cell: Vec<&ResultRow> =
                                in_n.iter().copied().filter(|r| r.method == method).collect();
                            let ise: Vec<f64> = cell.iter().filter_map(|r| r.ise).collect();
                            let ari: Vec<f64> = cell.iter().filter_map(|r| r.ari).collect();
                            let k: Vec<f64> = cell.iter().filter_map(|r| r.k_hat.map(|v| v as f64)).collect();
                            let lam: Vec<f64> = cell.iter().filter_map(|r| r.lambda).collect();
                            MethodSummary {
                                method,
                                mise_x1000: mise_summary(&ise).ok().map(|s| s.scaled(1000.0)),
                                ari: mise_summary(&ari).ok(),
                                k_hat_mean: mean_of(&k),
                                lambda_mean: mean_of(&lam),
                                replicates: cell.len(),
                                failures: cell.iter().filter(|r| r.ari.is_none()).count(),
                            }
                        })
                        .collect();
                    SizeSummary { n, methods }
                })
                .collect();
            ScenarioSummary { scenario, sizes }
        })
        .collect();
    Summary {
        schema_version: crate::io::SCHEMA_VERSION,
        scenarios,
    }
}
