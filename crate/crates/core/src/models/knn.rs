use serde::{Deserialize, Serialize};

use super::labels_to_bits;
use crate::encode::FeatureMatrix;
use crate::error::{Error, Result};
use crate::ingest::LoanOutcome;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KnnParams {
    pub k: usize,
}

impl Default for KnnParams {
    fn default() -> Self {
        KnnParams { k: 5 }
    }
}

/// Stored training set. Scores are the Denied fraction among the `k` nearest
/// rows by Euclidean distance; equal distances go to the lower row index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub k: usize,
    pub n_cols: usize,
    pub rows: Vec<f64>,
    pub denied: Vec<bool>,
}

pub fn fit(x: &FeatureMatrix, labels: &[LoanOutcome], p: &KnnParams) -> Result<KnnModel> {
    if p.k == 0 || p.k.is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!(
            "k must be odd, got {}",
            p.k
        )));
    }
    if p.k > x.n_rows() {
        return Err(Error::InvalidParameter(format!(
            "k = {} exceeds {} training rows",
            p.k,
            x.n_rows()
        )));
    }
    Ok(KnnModel {
        k: p.k,
        n_cols: x.n_cols(),
        rows: x.rows().flatten().copied().collect(),
        denied: labels_to_bits(labels),
    })
}

impl KnnModel {
    /// Indices of the k nearest training rows, nearest first.
    pub fn neighbors(&self, x: &[f64]) -> Vec<usize> {
        // (squared distance, index), kept sorted ascending.
        let mut best: Vec<(f64, usize)> = Vec::with_capacity(self.k + 1);
        for (i, row) in self.rows.chunks_exact(self.n_cols.max(1)).enumerate() {
            let bound = if best.len() == self.k {
                best[self.k - 1].0
            } else {
                f64::INFINITY
            };
            let mut d2 = 0.0;
            let mut pruned = false;
            for (a, b) in row.iter().zip(x) {
                d2 += (a - b) * (a - b);
                if d2 > bound {
                    pruned = true;
                    break;
                }
            }
            // Later rows never displace an equal-distance earlier row.
            if pruned || d2 >= bound {
                continue;
            }
            let pos = best.partition_point(|&(d, _)| d <= d2);
            best.insert(pos, (d2, i));
            best.truncate(self.k);
        }
        if self.n_cols == 0 {
            return (0..self.k.min(self.denied.len())).collect();
        }
        best.into_iter().map(|(_, i)| i).collect()
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        let nb = self.neighbors(x);
        nb.iter().filter(|&&i| self.denied[i]).count() as f64 / self.k as f64
    }
}
