//! Non-dominated candidates under (maximize expected value, minimize the
//! planted group's denial percentage).

use serde::{Deserialize, Serialize};

use crate::encode::FeatureSet;
use crate::models::ModelFamily;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureConfig {
    RaceAware,
    RaceBlind,
}

impl FeatureConfig {
    pub const ALL: [FeatureConfig; 2] = [FeatureConfig::RaceAware, FeatureConfig::RaceBlind];

    pub fn tag(self) -> &'static str {
        match self {
            FeatureConfig::RaceAware => "race_aware",
            FeatureConfig::RaceBlind => "race_blind",
        }
    }

    /// Race-blind drops race, applicant sex and tract minority share together.
    pub fn feature_set(self) -> FeatureSet {
        match self {
            FeatureConfig::RaceAware => FeatureSet::ALL,
            FeatureConfig::RaceBlind => FeatureSet::DEMOGRAPHIC_BLIND,
        }
    }
}

impl std::str::FromStr for FeatureConfig {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> crate::error::Result<Self> {
        FeatureConfig::ALL
            .into_iter()
            .find(|c| c.tag().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| {
                crate::error::Error::InvalidParameter(format!("unknown feature config `{s}`"))
            })
    }
}

impl std::fmt::Display for FeatureConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeoffPoint {
    pub candidate: String,
    pub family: ModelFamily,
    pub feature_config: FeatureConfig,
    pub expected_value_millions: f64,
    /// `None` when the test split has no applicant from the group.
    pub black_denial_pct: Option<f64>,
    pub median_accuracy: f64,
}

impl TradeoffPoint {
    /// Weakly better on both axes and strictly better on one.
    pub fn dominates(&self, other: &TradeoffPoint) -> bool {
        let (Some(a), Some(b)) = (self.black_denial_pct, other.black_denial_pct) else {
            return false;
        };
        let ev = (self.expected_value_millions, other.expected_value_millions);
        ev.0 >= ev.1 && a <= b && (ev.0 > ev.1 || a < b)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominatedPoint {
    pub point: TradeoffPoint,
    /// Frontier candidates that dominate this one.
    pub dominated_by: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frontier {
    /// Ascending denial percentage.
    pub frontier: Vec<TradeoffPoint>,
    pub dominated: Vec<DominatedPoint>,
    /// Points without a defined denial percentage.
    pub unranked: Vec<TradeoffPoint>,
}

/// Sweep in ascending denial order; a point survives when its expected value
/// beats everything with strictly lower denial and matches the best at its
/// own denial level.
pub fn tradeoff_frontier(candidates: &[TradeoffPoint]) -> Frontier {
    let (mut ranked, unranked): (Vec<&TradeoffPoint>, Vec<&TradeoffPoint>) = candidates
        .iter()
        .partition(|p| p.black_denial_pct.is_some());
    ranked.sort_by(|a, b| {
        let (da, db) = (a.black_denial_pct.unwrap(), b.black_denial_pct.unwrap());
        da.total_cmp(&db)
            .then(
                b.expected_value_millions
                    .total_cmp(&a.expected_value_millions),
            )
            .then(a.candidate.cmp(&b.candidate))
    });

    let mut frontier = Vec::new();
    let mut best_lower = f64::NEG_INFINITY;
    let mut i = 0;
    while i < ranked.len() {
        let level = ranked[i].black_denial_pct.unwrap();
        let mut j = i;
        while j < ranked.len() && ranked[j].black_denial_pct.unwrap() == level {
            j += 1;
        }
        // ranked[i] has the highest EV at this level.
        let top = ranked[i].expected_value_millions;
        if top > best_lower {
            frontier.extend(
                ranked[i..j]
                    .iter()
                    .filter(|p| p.expected_value_millions == top)
                    .map(|p| (*p).clone()),
            );
            best_lower = top;
        }
        i = j;
    }

    let dominated = ranked
        .iter()
        .filter(|p| !frontier.iter().any(|f| f.candidate == p.candidate))
        .map(|p| DominatedPoint {
            point: (*p).clone(),
            dominated_by: frontier
                .iter()
                .filter(|f| f.dominates(p))
                .map(|f| f.candidate.clone())
                .collect(),
        })
        .collect();
    Frontier {
        frontier,
        dominated,
        unranked: unranked.into_iter().cloned().collect(),
    }
}
