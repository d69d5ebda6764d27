use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{usage, Result};

/// Cross-tabulation of two labelings of the same observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContingencyTable {
    /// Distinct labels of the first partition, ascending.
    pub row_labels: Vec<usize>,
    pub col_labels: Vec<usize>,
    pub counts: Vec<Vec<usize>>,
    pub row_sums: Vec<usize>,
    pub col_sums: Vec<usize>,
    pub n: usize,
}

impl ContingencyTable {
    pub fn new(labels_a: &[usize], labels_b: &[usize]) -> Result<Self> {
        if labels_a.len() != labels_b.len() {
            return usage(format!(
                "label vectors differ in length ({} vs {})",
                labels_a.len(),
                labels_b.len()
            ));
        }
        let index = |labels: &[usize]| -> BTreeMap<usize, usize> {
            let mut m: BTreeMap<usize, usize> = labels.iter().map(|l| (*l, 0)).collect();
            for (i, v) in m.values_mut().enumerate() {
                *v = i;
            }
            m
        };
        let ra = index(labels_a);
        let rb = index(labels_b);
        let mut counts = vec![vec![0usize; rb.len()]; ra.len()];
        for (a, b) in labels_a.iter().zip(labels_b) {
            counts[ra[a]][rb[b]] += 1;
        }
        let row_sums = counts.iter().map(|r| r.iter().sum()).collect();
        let col_sums = (0..rb.len()).map(|j| counts.iter().map(|r| r[j]).sum()).collect();
        Ok(Self {
            row_labels: ra.into_keys().collect(),
            col_labels: rb.into_keys().collect(),
            counts,
            row_sums,
            col_sums,
            n: labels_a.len(),
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.row_labels.len(), self.col_labels.len())
    }
}

fn pairs(x: usize) -> f64 {
    let x = x as f64;
    x * (x - 1.0) / 2.0
}

/// Hubert–Arabie adjusted Rand index. Two single-cluster partitions (zero
/// denominator) score 1.
pub fn adjusted_rand_index(labels_a: &[usize], labels_b: &[usize]) -> Result<f64> {
    let table = ContingencyTable::new(labels_a, labels_b)?;
    if table.n < 2 {
        return usage("adjusted Rand index needs at least two observations");
    }
    let index: f64 = table.counts.iter().flatten().map(|c| pairs(*c)).sum();
    let sa: f64 = table.row_sums.iter().map(|c| pairs(*c)).sum();
    let sb: f64 = table.col_sums.iter().map(|c| pairs(*c)).sum();
    let expected = sa * sb / pairs(table.n);
    let max = 0.5 * (sa + sb);
    let denom = max - expected;
    if denom == 0.0 {
        return Ok(1.0);
    }
    Ok((index - expected) / denom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn identical_and_renamed_partitions() {
        let a = [1, 1, 2, 2, 3, 3, 3];
        assert_eq!(adjusted_rand_index(&a, &a).unwrap(), 1.0);
        let b = [7, 7, 4, 4, 9, 9, 9];
        assert_relative_eq!(adjusted_rand_index(&a, &b).unwrap(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn crossed_two_by_two() {
        // pairs: same/same 0, same in a only 2, same in b only 2, neither 2.
        // Expected index = 2·2/6 = 2/3, max = 2, so ARI = (0 − 2/3)/(2 − 2/3).
        // The unadjusted Rand index of this pair is 1/3.
        let a = [1, 1, 2, 2];
        let b = [1, 2, 1, 2];
        assert_relative_eq!(adjusted_rand_index(&a, &b).unwrap(), -0.5, epsilon = 1e-15);
        let mut agree = 0;
        for i in 0..4 {
            for j in i + 1..4 {
                agree += usize::from((a[i] == a[j]) == (b[i] == b[j]));
            }
        }
        assert_eq!(agree as f64 / 6.0, 1.0 / 3.0);
    }

    #[test]
    fn single_cluster_conventions() {
        assert_eq!(adjusted_rand_index(&[1, 1, 1], &[2, 2, 2]).unwrap(), 1.0);
        // one true class against a split partition
        assert_eq!(adjusted_rand_index(&[1, 1, 1, 1], &[1, 1, 2, 2]).unwrap(), 0.0);
    }

    #[test]
    fn contingency_shape_and_errors() {
        let t = ContingencyTable::new(&[1, 2, 3, 1], &[5, 5, 6, 6]).unwrap();
        assert_eq!(t.shape(), (3, 2));
        assert_eq!(t.counts, vec![vec![1, 1], vec![1, 0], vec![0, 1]]);
        assert!(adjusted_rand_index(&[1, 2], &[1]).is_err());
        assert!(adjusted_rand_index(&[1], &[1]).is_err());
    }
}
