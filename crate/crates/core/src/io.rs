//! File formats: numeric CSV input, label files, versioned JSON artifacts
//! and density grids for external plotting.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::eval::ContingencyTable;
use crate::fit::{CandidatePool, CellReport};
use crate::mixture::{GaussianMixture, LogDensity, MixtureRecord};
use crate::modal::Partition;
use crate::weights::{CvOutcome, WeightFit};

/// Version stamped into every JSON artifact as `schema_version`.
pub const SCHEMA_VERSION: u32 = 1;

fn records(text: &str, header: bool) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .has_headers(header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes())
}

/// Parses a numeric CSV. Every unparsable or ragged row is reported by
/// line number in a single error.
pub fn parse_data_csv(text: &str, header: bool) -> Result<DataMatrix> {
    let mut values = Vec::new();
    let mut width = None;
    let mut bad = Vec::new();
    let mut n = 0;
    for rec in records(text, header).records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.iter().all(str::is_empty) {
            continue;
        }
        let row: Option<Vec<f64>> = rec.iter().map(|f| f.parse::<f64>().ok().filter(|v| v.is_finite())).collect();
        match row {
            Some(row) if width.is_none_or(|w| w == row.len()) => {
                width = Some(row.len());
                values.extend(row);
                n += 1;
            }
            _ => bad.push(line.to_string()),
        }
    }
    if !bad.is_empty() {
        return Err(Error::Parse(format!("unparsable rows at line(s) {}", bad.join(", "))));
    }
    let d = width.ok_or_else(|| Error::Parse("no data rows".into()))?;
    DataMatrix::new(values, n, d)
}

pub fn read_data_csv(path: &Path, header: bool) -> Result<DataMatrix> {
    parse_data_csv(&std::fs::read_to_string(path)?, header)
}

/// Parses one label per row from the first column. Integer labels are kept;
/// any other text is coded `1, 2, …` in order of first appearance.
pub fn parse_labels(text: &str, header: bool) -> Result<Vec<usize>> {
    let raw: Vec<String> = records(text, header)
        .records()
        .filter_map(|r| match r {
            Ok(r) if r.get(0).is_some_and(|f| !f.is_empty()) => Some(Ok(r[0].to_string())),
            Ok(_) => None,
            Err(e) => Some(Err(e)),
        })
        .collect::<std::result::Result<_, _>>()?;
    if raw.is_empty() {
        return Err(Error::Parse("no labels".into()));
    }
    if let Ok(ints) = raw.iter().map(|s| s.parse::<usize>()).collect::<std::result::Result<Vec<_>, _>>() {
        return Ok(ints);
    }
    let mut codes = HashMap::new();
    Ok(raw
        .iter()
        .map(|s| {
            let next = codes.len() + 1;
            *codes.entry(s.clone()).or_insert(next)
        })
        .collect())
}

pub fn read_labels(path: &Path, header: bool) -> Result<Vec<usize>> {
    parse_labels(&std::fs::read_to_string(path)?, header)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    match value.get("schema_version").and_then(|v| v.as_u64()) {
        Some(v) if v == u64::from(SCHEMA_VERSION) => Ok(serde_json::from_value(value)?),
        Some(v) => Err(Error::Parse(format!("{}: unsupported schema_version {v}", path.display()))),
        None => Err(Error::Parse(format!("{}: missing schema_version", path.display()))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedModel {
    pub rank: usize,
    #[serde(flatten)]
    pub model: MixtureRecord,
}

/// Ranked candidate pool plus the per-cell fit report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolArtifact {
    pub schema_version: u32,
    pub n: usize,
    pub d: usize,
    pub ensemble_size: usize,
    pub models: Vec<RankedModel>,
    pub cells: Vec<CellReport>,
}

impl PoolArtifact {
    pub fn from_pool(pool: &CandidatePool) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            n: pool.n(),
            d: pool.models().first().map_or(0, |m| m.dim()),
            ensemble_size: pool.ensemble_size(),
            models: pool
                .models()
                .iter()
                .enumerate()
                .map(|(i, m)| RankedModel {
                    rank: i + 1,
                    model: m.into(),
                })
                .collect(),
            cells: pool.cells().to_vec(),
        }
    }

    pub fn into_pool(self) -> Result<CandidatePool> {
        let models = self
            .models
            .into_iter()
            .map(|r| GaussianMixture::try_from(r.model))
            .collect::<Result<Vec<_>>>()?;
        if models.is_empty() {
            return Err(Error::Parse("pool contains no models".into()));
        }
        Ok(CandidatePool::new(models, self.ensemble_size, self.n)?.with_cells(self.cells))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightsArtifact {
    pub schema_version: u32,
    /// `aic`, `bic`, `cv` or `manual`.
    pub penalty: String,
    #[serde(flatten)]
    pub fit: WeightFit,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub cv: Option<CvOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionArtifact {
    pub schema_version: u32,
    #[serde(flatten)]
    pub partition: Partition,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsArtifact {
    pub schema_version: u32,
    pub n: usize,
    pub ari: f64,
    pub k_hat: usize,
    pub k_true: usize,
    pub contingency: ContingencyTable,
}

/// Writes `x,y,density` rows over a `resolution × resolution` lattice.
pub fn write_density_grid<D: LogDensity + ?Sized, W: Write>(
    density: &D,
    bounds: [(f64, f64); 2],
    resolution: usize,
    out: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["x", "y", "density"])?;
    let step = |(lo, hi): (f64, f64), i: usize| lo + (hi - lo) * i as f64 / (resolution - 1) as f64;
    for i in 0..resolution {
        let x = step(bounds[0], i);
        for j in 0..resolution {
            let y = step(bounds[1], j);
            let f = density.ln_density(&[x, y]).exp();
            w.write_record([x.to_string(), y.to_string(), format!("{f:e}")])?;
        }
    }
    w.flush()?;
    Ok(())
}
