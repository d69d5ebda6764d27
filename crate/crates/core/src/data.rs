use crate::error::{usage, Result};

/// Dense n×d observation matrix stored row-major so each observation is a
/// contiguous slice.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    values: Vec<f64>,
    n: usize,
    d: usize,
}

impl DataMatrix {
    pub fn new(values: Vec<f64>, n: usize, d: usize) -> Result<Self> {
        if d == 0 {
            return usage("data must have at least one column");
        }
        if values.len() != n * d {
            return usage(format!(
                "data buffer has {} values, expected {}×{}",
                values.len(),
                n,
                d
            ));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return usage(format!("non-finite value in row {}", pos / d));
        }
        Ok(Self { values, n, d })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let Some(first) = rows.first() else {
            return usage("data has no rows");
        };
        let d = first.as_ref().len();
        let mut values = Vec::with_capacity(rows.len() * d);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != d {
                return usage(format!("row {i} has {} columns, expected {d}", r.len()));
            }
            values.extend_from_slice(r);
        }
        Self::new(values, rows.len(), d)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.d)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    /// Rows at the given indices, in that order.
    pub fn select(&self, idx: &[usize]) -> DataMatrix {
        let mut values = Vec::with_capacity(idx.len() * self.d);
        for &i in idx {
            values.extend_from_slice(self.row(i));
        }
        DataMatrix {
            values,
            n: idx.len(),
            d: self.d,
        }
    }

    pub fn column_means(&self) -> Vec<f64> {
        let mut mean = vec![0.0; self.d];
        for r in self.rows() {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= self.n as f64);
        mean
    }

    /// Per-column sample standard deviations (divisor n − 1).
    pub fn column_sds(&self) -> Vec<f64> {
        let mean = self.column_means();
        let mut ss = vec![0.0; self.d];
        for r in self.rows() {
            for j in 0..self.d {
                let c = r[j] - mean[j];
                ss[j] += c * c;
            }
        }
        let denom = (self.n.max(2) - 1) as f64;
        ss.into_iter().map(|s| (s / denom).sqrt()).collect()
    }
}
