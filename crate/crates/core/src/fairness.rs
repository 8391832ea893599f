//! Group confusion rates and the six White-minus-group disparity metrics.
//!
//! The positive class is Denied throughout. A rate whose denominator is zero
//! is `None`, and every disparity built from it is `None` as well.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{LoanOutcome, RaceCategory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Group {
    Race(RaceCategory),
    /// Black, Hispanic, Asian and other-race applicants together.
    PeopleOfColor,
}

impl Group {
    pub fn contains(self, race: RaceCategory) -> bool {
        match self {
            Group::Race(r) => r == race,
            Group::PeopleOfColor => race.is_person_of_color(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Group::Race(r) => r.name(),
            Group::PeopleOfColor => "PoC",
        }
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl From<Group> for String {
    fn from(g: Group) -> String {
        g.name().to_string()
    }
}

impl TryFrom<String> for Group {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl std::str::FromStr for Group {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("poc") {
            return Ok(Group::PeopleOfColor);
        }
        RaceCategory::ALL
            .into_iter()
            .find(|r| r.name().eq_ignore_ascii_case(s))
            .map(Group::Race)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown group `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

fn ratio(num: f64, den: f64) -> Option<f64> {
    (den > 0.0).then(|| num / den)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupRates {
    pub group: Group,
    pub n: usize,
    pub counts: Confusion,
    pub tpr: Option<f64>,
    pub fpr: Option<f64>,
    pub ppv: Option<f64>,
    /// Mean score over truly denied rows.
    pub mean_score_pos: Option<f64>,
    /// Mean score over truly approved rows.
    pub mean_score_neg: Option<f64>,
}

pub fn group_rates(
    predictions: &[LoanOutcome],
    scores: &[f64],
    labels: &[LoanOutcome],
    groups: &[RaceCategory],
    target: Group,
) -> Result<GroupRates> {
    let n = labels.len();
    if predictions.len() != n || scores.len() != n || groups.len() != n {
        return Err(Error::LengthMismatch(format!(
            "predictions {}, scores {}, labels {n}, groups {}",
            predictions.len(),
            scores.len(),
            groups.len()
        )));
    }
    let mut c = Confusion::default();
    let (mut sum_pos, mut sum_neg) = (0.0, 0.0);
    let mut members = 0;
    for i in (0..n).filter(|&i| target.contains(groups[i])) {
        members += 1;
        match (labels[i].is_denied(), predictions[i].is_denied()) {
            (true, true) => c.tp += 1,
            (true, false) => c.fn_ += 1,
            (false, true) => c.fp += 1,
            (false, false) => c.tn += 1,
        }
        if labels[i].is_denied() {
            sum_pos += scores[i];
        } else {
            sum_neg += scores[i];
        }
    }
    let pos = (c.tp + c.fn_) as f64;
    let neg = (c.fp + c.tn) as f64;
    Ok(GroupRates {
        group: target,
        n: members,
        counts: c,
        tpr: ratio(c.tp as f64, pos),
        fpr: ratio(c.fp as f64, neg),
        ppv: ratio(c.tp as f64, (c.tp + c.fp) as f64),
        mean_score_pos: ratio(sum_pos, pos),
        mean_score_neg: ratio(sum_neg, neg),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Metric {
    #[serde(rename = "EOP")]
    EqualOpportunity,
    #[serde(rename = "FPERB")]
    FalsePositiveErrorRateBalance,
    #[serde(rename = "EO")]
    EqualOdds,
    #[serde(rename = "PPP")]
    PositivePredictiveParity,
    #[serde(rename = "PCB")]
    PositiveClassBalance,
    #[serde(rename = "NCB")]
    NegativeClassBalance,
}

impl Metric {
    pub const ALL: [Metric; 6] = [
        Metric::EqualOpportunity,
        Metric::FalsePositiveErrorRateBalance,
        Metric::EqualOdds,
        Metric::PositivePredictiveParity,
        Metric::PositiveClassBalance,
        Metric::NegativeClassBalance,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Metric::EqualOpportunity => "EOP",
            Metric::FalsePositiveErrorRateBalance => "FPERB",
            Metric::EqualOdds => "EO",
            Metric::PositivePredictiveParity => "PPP",
            Metric::PositiveClassBalance => "PCB",
            Metric::NegativeClassBalance => "NCB",
        }
    }
}

/// Reference minus comparison, in percentage points. `eo` is non-negative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisparityRow {
    pub reference_group: Group,
    pub comparison_group: Group,
    pub eop: Option<f64>,
    pub fperb: Option<f64>,
    pub eo: Option<f64>,
    pub ppp: Option<f64>,
    pub pcb: Option<f64>,
    pub ncb: Option<f64>,
}

impl DisparityRow {
    pub fn get(&self, m: Metric) -> Option<f64> {
        match m {
            Metric::EqualOpportunity => self.eop,
            Metric::FalsePositiveErrorRateBalance => self.fperb,
            Metric::EqualOdds => self.eo,
            Metric::PositivePredictiveParity => self.ppp,
            Metric::PositiveClassBalance => self.pcb,
            Metric::NegativeClassBalance => self.ncb,
        }
    }
}

fn diff_pct(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    Some((a? - b?) * 100.0)
}

pub fn disparities(reference: &GroupRates, comparison: &GroupRates) -> DisparityRow {
    let eop = diff_pct(reference.tpr, comparison.tpr);
    let fperb = diff_pct(reference.fpr, comparison.fpr);
    DisparityRow {
        reference_group: reference.group,
        comparison_group: comparison.group,
        eop,
        fperb,
        eo: eop.zip(fperb).map(|(a, b)| 0.5 * (b.abs() + a.abs())),
        ppp: diff_pct(reference.ppv, comparison.ppv),
        pcb: diff_pct(reference.mean_score_pos, comparison.mean_score_pos),
        ncb: diff_pct(reference.mean_score_neg, comparison.mean_score_neg),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HeatBin {
    DeepGreen,
    LightGreen,
    Yellow,
    Orange,
    Red,
    Undefined,
}

impl HeatBin {
    pub fn name(self) -> &'static str {
        match self {
            HeatBin::DeepGreen => "deep-green",
            HeatBin::LightGreen => "light-green",
            HeatBin::Yellow => "yellow",
            HeatBin::Orange => "orange",
            HeatBin::Red => "red",
            HeatBin::Undefined => "undefined",
        }
    }

    pub fn fill(self) -> &'static str {
        match self {
            HeatBin::DeepGreen => "#1a7f37",
            HeatBin::LightGreen => "#8fd19e",
            HeatBin::Yellow => "#f5e663",
            HeatBin::Orange => "#f0a04b",
            HeatBin::Red => "#d64545",
            HeatBin::Undefined => "#d0d0d0",
        }
    }
}

/// Lower edges (in whole percent) of the light-green, yellow, orange and red
/// bins.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeatmapBins {
    pub edges: [f64; 4],
}

impl Default for HeatmapBins {
    fn default() -> Self {
        HeatmapBins {
            edges: [3.0, 7.0, 12.0, 17.0],
        }
    }
}

impl HeatmapBins {
    pub fn bin(&self, value: Option<f64>) -> HeatBin {
        let Some(v) = value else {
            return HeatBin::Undefined;
        };
        let a = v.abs();
        let [lg, y, o, r] = self.edges;
        if a < lg {
            HeatBin::DeepGreen
        } else if a < y {
            HeatBin::LightGreen
        } else if a < o {
            HeatBin::Yellow
        } else if a < r {
            HeatBin::Orange
        } else {
            HeatBin::Red
        }
    }
}

/// One model's test-set decisions with the group of every row.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSet {
    pub predictions: Vec<LoanOutcome>,
    pub scores: Vec<f64>,
    pub labels: Vec<LoanOutcome>,
    pub races: Vec<RaceCategory>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableCell {
    pub metric: Metric,
    /// Rounded to whole percent.
    pub value: Option<f64>,
    pub bin: HeatBin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    /// Candidate label, e.g. `RF` or `RF/race_blind`.
    pub model: String,
    pub row: DisparityRow,
    pub cells: Vec<TableCell>,
}

pub fn table_row(model: &str, row: DisparityRow, bins: &HeatmapBins) -> TableRow {
    let cells = Metric::ALL
        .into_iter()
        .map(|m| {
            let value = row.get(m).map(f64::round);
            TableCell {
                metric: m,
                value,
                bin: bins.bin(value),
            }
        })
        .collect();
    TableRow {
        model: model.to_string(),
        row,
        cells,
    }
}

/// Rows for every `(model, comparison group)` pair, White as reference, in
/// the order of `models`.
pub fn disparity_table(
    models: &[String],
    results: &BTreeMap<String, PredictionSet>,
    groups: &[Group],
    bins: &HeatmapBins,
) -> Result<Vec<TableRow>> {
    let mut out = Vec::new();
    for model in models {
        let p = results
            .get(model)
            .ok_or_else(|| Error::MissingFamily(model.clone()))?;
        let rates = |g| group_rates(&p.predictions, &p.scores, &p.labels, &p.races, g);
        let white = rates(Group::Race(RaceCategory::White))?;
        for &g in groups {
            out.push(table_row(model, disparities(&white, &rates(g)?), bins));
        }
    }
    Ok(out)
}
