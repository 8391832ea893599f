//! Horizontal search for less discriminatory lending models.
//!
//! Loan application records are parsed from HMDA-schema files
//! ([`ingest`]), encoded ([`encode`]), sampled into seeded train/test splits
//! ([`split`]) and scored by five model families ([`models`]). Each
//! candidate is judged on accuracy, White-minus-group disparities
//! ([`fairness`]) and the outcome of a single capped lender ([`sim`]); the
//! non-dominated candidates form the trade-off frontier ([`frontier`]).
//! [`search`] runs the whole grid and [`report`] writes it to disk.

pub mod encode;
pub mod error;
pub mod fairness;
pub mod frontier;
pub mod ingest;
pub mod models;
pub mod report;
pub mod search;
pub mod seed;
pub mod sim;
pub mod split;
pub mod summary;

pub use encode::{encode_features, FeatureEncoder, FeatureMatrix, FeatureSet};
pub use error::{Error, Result};
pub use fairness::{disparities, disparity_table, group_rates, Group, GroupRates, Metric};
pub use frontier::{tradeoff_frontier, FeatureConfig, Frontier, TradeoffPoint};
pub use ingest::{
    categorize_race, map_action_to_outcome, parse_hmda_csv, LoanOutcome, LoanRecord, RaceCategory,
    SchemaConfig,
};
pub use models::{fit, predict_scores, threshold_classify, ModelFamily, ModelSpec, TrainedModel};
pub use report::write_report;
pub use search::{
    accuracy_distribution, race_inclusion_delta, run_horizontal_search, SearchConfig, SearchReport,
};
pub use sim::{negative_impact, rank_and_approve, Cents, LoanApplication, PortfolioResult};
pub use split::{sample_and_split, DatasetSplit};
pub use summary::summarize_dataset;

#[cfg(doctest)]
mod guide {
    #[doc = include_str!("../../../book/src/overview.md")]
    mod overview {}
    #[doc = include_str!("../../../book/src/ingest.md")]
    mod ingest {}
    #[doc = include_str!("../../../book/src/features.md")]
    mod features {}
    #[doc = include_str!("../../../book/src/models.md")]
    mod models {}
    #[doc = include_str!("../../../book/src/fairness.md")]
    mod fairness {}
    #[doc = include_str!("../../../book/src/lender.md")]
    mod lender {}
    #[doc = include_str!("../../../book/src/search.md")]
    mod search {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
