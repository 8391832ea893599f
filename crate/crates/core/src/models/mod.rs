//! The five classifier families and their shared scoring interface.
//!
//! Every fitted model scores a row with the probability that the application
//! is denied. The lender simulation uses the complement as the repayment
//! probability.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::encode::FeatureMatrix;
use crate::error::{Error, Result};
use crate::ingest::LoanOutcome;

pub mod cart;
pub mod forest;
pub mod knn;
pub mod logistic;
pub mod naive_bayes;

pub use cart::{Tree, TreeParams};
pub use forest::{ForestParams, MaxFeatures};
pub use knn::KnnParams;
pub use logistic::LogisticParams;
pub use naive_bayes::NaiveBayesParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ModelFamily {
    #[serde(rename = "LR")]
    Logistic,
    #[serde(rename = "KNN")]
    Knn,
    #[serde(rename = "CART")]
    Cart,
    #[serde(rename = "NB")]
    NaiveBayes,
    #[serde(rename = "RF")]
    RandomForest,
}

impl ModelFamily {
    pub const ALL: [ModelFamily; 5] = [
        ModelFamily::Logistic,
        ModelFamily::Knn,
        ModelFamily::Cart,
        ModelFamily::NaiveBayes,
        ModelFamily::RandomForest,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            ModelFamily::Logistic => "LR",
            ModelFamily::Knn => "KNN",
            ModelFamily::Cart => "CART",
            ModelFamily::NaiveBayes => "NB",
            ModelFamily::RandomForest => "RF",
        }
    }

    pub fn default_hyperparams(self) -> Hyperparams {
        match self {
            ModelFamily::Logistic => Hyperparams::Logistic(LogisticParams::default()),
            ModelFamily::Knn => Hyperparams::Knn(KnnParams::default()),
            ModelFamily::Cart => Hyperparams::Cart(TreeParams::default()),
            ModelFamily::NaiveBayes => Hyperparams::NaiveBayes(NaiveBayesParams::default()),
            ModelFamily::RandomForest => Hyperparams::RandomForest(ForestParams::default()),
        }
    }
}

impl fmt::Display for ModelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for ModelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelFamily::ALL
            .into_iter()
            .find(|f| f.tag().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::InvalidParameter(format!("unknown model family `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family")]
pub enum Hyperparams {
    #[serde(rename = "LR")]
    Logistic(LogisticParams),
    #[serde(rename = "KNN")]
    Knn(KnnParams),
    #[serde(rename = "CART")]
    Cart(TreeParams),
    #[serde(rename = "NB")]
    NaiveBayes(NaiveBayesParams),
    #[serde(rename = "RF")]
    RandomForest(ForestParams),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub hyperparams: Hyperparams,
    pub seed: u64,
}

impl ModelSpec {
    pub fn new(family: ModelFamily, seed: u64) -> Self {
        ModelSpec {
            hyperparams: family.default_hyperparams(),
            seed,
        }
    }

    pub fn family(&self) -> ModelFamily {
        match self.hyperparams {
            Hyperparams::Logistic(_) => ModelFamily::Logistic,
            Hyperparams::Knn(_) => ModelFamily::Knn,
            Hyperparams::Cart(_) => ModelFamily::Cart,
            Hyperparams::NaiveBayes(_) => ModelFamily::NaiveBayes,
            Hyperparams::RandomForest(_) => ModelFamily::RandomForest,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum FittedState {
    Logistic(logistic::LogisticModel),
    Knn(knn::KnnModel),
    Tree(Tree),
    NaiveBayes(naive_bayes::NaiveBayesModel),
    Forest(forest::Forest),
}

/// A fitted classifier. Immutable after [`fit`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub spec: ModelSpec,
    /// Column names of the training matrix.
    pub columns: Vec<String>,
    pub state: FittedState,
}

impl TrainedModel {
    pub fn family(&self) -> ModelFamily {
        self.spec.family()
    }

    /// P(Denied | row).
    pub fn score_row(&self, x: &[f64]) -> f64 {
        match &self.state {
            FittedState::Logistic(m) => m.score(x),
            FittedState::Knn(m) => m.score(x),
            FittedState::Tree(t) => t.score(x),
            FittedState::NaiveBayes(m) => m.score(x),
            FittedState::Forest(f) => f.score(x),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

pub(crate) fn labels_to_bits(labels: &[LoanOutcome]) -> Vec<bool> {
    labels.iter().map(|l| l.is_denied()).collect()
}

pub(crate) fn check_training(x: &FeatureMatrix, labels: &[LoanOutcome]) -> Result<()> {
    if x.n_rows() != labels.len() {
        return Err(Error::LengthMismatch(format!(
            "{} rows but {} labels",
            x.n_rows(),
            labels.len()
        )));
    }
    if x.n_rows() == 0 {
        return Err(Error::EmptyTrainingSet);
    }
    x.check_finite()
}

pub(crate) fn require_both_classes(labels: &[LoanOutcome]) -> Result<()> {
    let denied = labels.iter().filter(|l| l.is_denied()).count();
    if denied == 0 || denied == labels.len() {
        Err(Error::SingleClass)
    } else {
        Ok(())
    }
}

/// Fit the model described by `spec`.
pub fn fit(spec: &ModelSpec, x: &FeatureMatrix, labels: &[LoanOutcome]) -> Result<TrainedModel> {
    check_training(x, labels)?;
    let state = match &spec.hyperparams {
        Hyperparams::Logistic(p) => FittedState::Logistic(logistic::fit(x, labels, p)?),
        Hyperparams::Knn(p) => FittedState::Knn(knn::fit(x, labels, p)?),
        Hyperparams::Cart(p) => FittedState::Tree(cart::fit(x, labels, p)?),
        Hyperparams::NaiveBayes(p) => FittedState::NaiveBayes(naive_bayes::fit(x, labels, p)?),
        Hyperparams::RandomForest(p) => FittedState::Forest(forest::fit(x, labels, p, spec.seed)?),
    };
    Ok(TrainedModel {
        spec: spec.clone(),
        columns: x.columns().iter().map(|c| c.name()).collect(),
        state,
    })
}

pub fn fit_logistic(
    x: &FeatureMatrix,
    labels: &[LoanOutcome],
    tol: f64,
    max_iter: usize,
) -> Result<TrainedModel> {
    let params = LogisticParams { tol, max_iter };
    fit(
        &ModelSpec {
            hyperparams: Hyperparams::Logistic(params),
            seed: 0,
        },
        x,
        labels,
    )
}

pub fn fit_knn(x: &FeatureMatrix, labels: &[LoanOutcome], k: usize) -> Result<TrainedModel> {
    fit(
        &ModelSpec {
            hyperparams: Hyperparams::Knn(KnnParams { k }),
            seed: 0,
        },
        x,
        labels,
    )
}

pub fn fit_cart(
    x: &FeatureMatrix,
    labels: &[LoanOutcome],
    max_depth: Option<usize>,
    min_leaf: usize,
) -> Result<TrainedModel> {
    fit(
        &ModelSpec {
            hyperparams: Hyperparams::Cart(TreeParams {
                max_depth,
                min_leaf,
            }),
            seed: 0,
        },
        x,
        labels,
    )
}

pub fn fit_gaussian_nb(
    x: &FeatureMatrix,
    labels: &[LoanOutcome],
    var_smoothing_ratio: f64,
) -> Result<TrainedModel> {
    fit(
        &ModelSpec {
            hyperparams: Hyperparams::NaiveBayes(NaiveBayesParams {
                var_smoothing_ratio,
            }),
            seed: 0,
        },
        x,
        labels,
    )
}

pub fn fit_random_forest(
    x: &FeatureMatrix,
    labels: &[LoanOutcome],
    params: ForestParams,
    seed: u64,
) -> Result<TrainedModel> {
    fit(
        &ModelSpec {
            hyperparams: Hyperparams::RandomForest(params),
            seed,
        },
        x,
        labels,
    )
}

/// One denial probability per row of `features`.
pub fn predict_scores(model: &TrainedModel, features: &FeatureMatrix) -> Result<Vec<f64>> {
    if features.n_rows() == 0 {
        return Ok(Vec::new());
    }
    let names: Vec<String> = features.columns().iter().map(|c| c.name()).collect();
    if names != model.columns {
        return Err(Error::ColumnMismatch {
            expected: model.columns.len(),
            got: names.len(),
        });
    }
    Ok(features.rows().map(|r| model.score_row(r)).collect())
}

pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// Denied when the score is strictly above `threshold`.
pub fn threshold_classify(scores: &[f64], threshold: f64) -> Vec<LoanOutcome> {
    debug_assert!(threshold > 0.0 && threshold < 1.0);
    scores
        .iter()
        .map(|&s| {
            if s > threshold {
                LoanOutcome::Denied
            } else {
                LoanOutcome::Approved
            }
        })
        .collect()
}

pub fn accuracy(predictions: &[LoanOutcome], labels: &[LoanOutcome]) -> f64 {
    debug_assert_eq!(predictions.len(), labels.len());
    if labels.is_empty() {
        return 0.0;
    }
    let hits = predictions
        .iter()
        .zip(labels)
        .filter(|(p, l)| p == l)
        .count();
    hits as f64 / labels.len() as f64
}
