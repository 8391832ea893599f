use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::LoanRecord;
use crate::seed;

pub const DEFAULT_SAMPLE_SIZE: usize = 100_000;
pub const DEFAULT_TRAIN_FRAC: f64 = 0.8;

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub train: Vec<LoanRecord>,
    pub test: Vec<LoanRecord>,
    pub seed: u64,
    pub train_frac: f64,
}

impl DatasetSplit {
    pub fn fractions(&self) -> (f64, f64) {
        (self.train_frac, 1.0 - self.train_frac)
    }

    /// Order-sensitive digest of the train and test ids, reported so that
    /// paired comparisons can be shown to share a split.
    pub fn fingerprint(&self) -> String {
        let ids = |rs: &[LoanRecord]| rs.iter().map(|r| r.id).collect::<Vec<_>>();
        let h = seed::derive(
            self.train.len() as u64,
            &ids(&self.train)
                .into_iter()
                .chain([u64::MAX])
                .chain(ids(&self.test))
                .collect::<Vec<_>>(),
        );
        format!("{h:016x}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitInfo {
    pub seed: u64,
    pub train: usize,
    pub test: usize,
    pub fingerprint: String,
}

impl From<&DatasetSplit> for SplitInfo {
    fn from(s: &DatasetSplit) -> Self {
        SplitInfo {
            seed: s.seed,
            train: s.train.len(),
            test: s.test.len(),
            fingerprint: s.fingerprint(),
        }
    }
}

/// Uniform sample without replacement, then a random train/test partition.
/// The training side gets `round(sample_size * train_frac)` records.
pub fn sample_and_split(
    records: &[LoanRecord],
    sample_size: usize,
    train_frac: f64,
    seed: u64,
) -> Result<DatasetSplit> {
    if sample_size > records.len() {
        return Err(Error::SampleTooLarge {
            requested: sample_size,
            available: records.len(),
        });
    }
    if !(train_frac > 0.0 && train_frac < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "train_frac must lie in (0, 1), got {train_frac}"
        )));
    }
    let mut rng = seed::rng(seed, &[0x5A3D]);
    // `sample` returns indices in random order, so the first n_train of them
    // form a uniformly random partition.
    let picked = rand::seq::index::sample(&mut rng, records.len(), sample_size).into_vec();
    let n_train = (sample_size as f64 * train_frac).round() as usize;
    let (tr, te) = picked.split_at(n_train);
    Ok(DatasetSplit {
        train: tr.iter().map(|&i| records[i].clone()).collect(),
        test: te.iter().map(|&i| records[i].clone()).collect(),
        seed,
        train_frac,
    })
}
