use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cart::{SplitData, Tree, TreeParams};
use crate::encode::FeatureMatrix;
use crate::error::{Error, Result};
use crate::ingest::LoanOutcome;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    /// `ceil(sqrt(d))`.
    Sqrt,
    All,
    Count(usize),
}

impl MaxFeatures {
    pub fn resolve(self, d: usize) -> usize {
        match self {
            MaxFeatures::Sqrt => (d as f64).sqrt().ceil() as usize,
            MaxFeatures::All => d,
            MaxFeatures::Count(k) => k.min(d),
        }
        .max(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    pub max_features: MaxFeatures,
    /// Turning this off trains every tree on the full training set.
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 100,
            max_depth: None,
            min_leaf: 1,
            max_features: MaxFeatures::Sqrt,
            bootstrap: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<Tree>,
    /// Seed each tree's bootstrap and feature draws came from.
    pub tree_seeds: Vec<u64>,
}

impl Forest {
    pub fn score(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.score(x)).sum::<f64>() / self.trees.len() as f64
    }
}

pub fn fit(
    x: &FeatureMatrix,
    labels: &[LoanOutcome],
    p: &ForestParams,
    seed: u64,
) -> Result<Forest> {
    if x.n_rows() == 0 {
        return Err(Error::EmptyTrainingSet);
    }
    if p.n_trees == 0 {
        return Err(Error::InvalidParameter(
            "a forest needs at least one tree".into(),
        ));
    }
    let data = SplitData::new(x, labels);
    let n = data.n_rows();
    let mtry = p.max_features.resolve(data.n_cols());
    let tree_params = TreeParams {
        max_depth: p.max_depth,
        min_leaf: p.min_leaf,
    };
    let tree_seeds: Vec<u64> = (0..p.n_trees as u64)
        .map(|t| seed::derive(seed, &[t]))
        .collect();
    let trees = tree_seeds
        .par_iter()
        .map(|&s| {
            let mut rng = seed::rng(s, &[]);
            let rows: Vec<usize> = if p.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            data.grow(rows, &tree_params, Some((&mut rng, mtry)))
        })
        .collect();
    Ok(Forest { trees, tree_seeds })
}
