//! Per-race dataset statistics: shares, outcome mix, mean loan amount and
//! mean interest rate.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::ingest::{LoanRecord, RaceCategory};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RaceSummary {
    pub count: usize,
    pub share: f64,
    pub approved_share: f64,
    pub denied_share: f64,
    pub mean_loan_amount: f64,
    /// `None` when no record of the group has a rate.
    pub mean_interest_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetSummary {
    pub total: usize,
    pub by_race: BTreeMap<RaceCategory, RaceSummary>,
}

pub fn summarize_dataset(records: &[LoanRecord]) -> DatasetSummary {
    let total = records.len();
    let mut groups: BTreeMap<RaceCategory, Vec<&LoanRecord>> = BTreeMap::new();
    for r in records {
        groups.entry(r.race).or_default().push(r);
    }
    let by_race = groups
        .into_iter()
        .map(|(race, rs)| {
            let n = rs.len() as f64;
            let denied = rs.iter().filter(|r| r.outcome.is_denied()).count() as f64;
            let rates: Vec<f64> = rs.iter().filter_map(|r| r.interest_rate).collect();
            let summary = RaceSummary {
                count: rs.len(),
                share: n / total as f64,
                approved_share: (n - denied) / n,
                denied_share: denied / n,
                mean_loan_amount: rs.iter().map(|r| r.loan_amount).sum::<f64>() / n,
                mean_interest_rate: (!rates.is_empty())
                    .then(|| rates.iter().sum::<f64>() / rates.len() as f64),
            };
            (race, summary)
        })
        .collect();
    DatasetSummary { total, by_race }
}
