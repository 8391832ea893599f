//! Loan Application Register ingestion.
//!
//! Reads delimited HMDA-schema files, derives the race category from the
//! first race and ethnicity fields, maps the action-taken code to the binary
//! outcome, and drops (with a count) every row missing a required feature.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RaceCategory {
    Asian,
    Black,
    White,
    Hispanic,
    OtherRace,
    RaceNotReported,
    #[serde(rename = "None")]
    NoneCategory,
}

impl RaceCategory {
    pub const ALL: [RaceCategory; 7] = [
        RaceCategory::Asian,
        RaceCategory::Black,
        RaceCategory::White,
        RaceCategory::Hispanic,
        RaceCategory::OtherRace,
        RaceCategory::RaceNotReported,
        RaceCategory::NoneCategory,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RaceCategory::Asian => "Asian",
            RaceCategory::Black => "Black",
            RaceCategory::White => "White",
            RaceCategory::Hispanic => "Hispanic",
            RaceCategory::OtherRace => "OtherRace",
            RaceCategory::RaceNotReported => "RaceNotReported",
            RaceCategory::NoneCategory => "None",
        }
    }

    /// Member of the people-of-color comparison group.
    pub fn is_person_of_color(self) -> bool {
        matches!(
            self,
            RaceCategory::Black
                | RaceCategory::Hispanic
                | RaceCategory::Asian
                | RaceCategory::OtherRace
        )
    }
}

impl fmt::Display for RaceCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Race codes listed for `applicant_race_1`.
pub const RACE_CODES: [i32; 18] = [
    1, 2, 21, 22, 23, 24, 25, 26, 27, 3, 4, 41, 42, 43, 44, 5, 6, 7,
];
/// Ethnicity codes listed for `applicant_ethnicity_1`, plus the not-Hispanic
/// and not-provided codes the categorization rules reference.
pub const ETHNICITY_CODES: [i32; 8] = [1, 11, 12, 13, 14, 2, 3, 4];

const HISPANIC_ETHNICITY: [i32; 5] = [1, 11, 12, 13, 14];
const NON_HISPANIC_ETHNICITY: [i32; 3] = [2, 3, 4];

/// Assign the single race category for a `(applicant_race_1,
/// applicant_ethnicity_1)` pair.
///
/// A Hispanic ethnicity code wins over any race code. The race-based
/// categories require a non-Hispanic ethnicity code (2, 3 or 4); anything
/// else, including unknown codes, is [`RaceCategory::NoneCategory`].
pub fn categorize_race(race_code: i32, ethnicity_code: i32) -> RaceCategory {
    if HISPANIC_ETHNICITY.contains(&ethnicity_code) {
        return RaceCategory::Hispanic;
    }
    if !NON_HISPANIC_ETHNICITY.contains(&ethnicity_code) {
        return RaceCategory::NoneCategory;
    }
    match race_code {
        2 | 21..=27 => RaceCategory::Asian,
        3 => RaceCategory::Black,
        5 => RaceCategory::White,
        1 | 4 | 41..=44 => RaceCategory::OtherRace,
        6 => RaceCategory::RaceNotReported,
        _ => RaceCategory::NoneCategory,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum LoanOutcome {
    Approved,
    Denied,
}

impl LoanOutcome {
    pub fn is_denied(self) -> bool {
        self == LoanOutcome::Denied
    }

    pub fn as_label(self) -> f64 {
        if self.is_denied() {
            1.0
        } else {
            0.0
        }
    }
}

/// The six action-taken values that carry an approve/deny decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActionTaken {
    LoanOriginated,
    ApprovedNotAccepted,
    ApplicationDenied,
    PurchasedLoan,
    PreapprovalDenied,
    PreapprovalApprovedNotAccepted,
}

impl ActionTaken {
    pub const ALL: [ActionTaken; 6] = [
        ActionTaken::LoanOriginated,
        ActionTaken::ApprovedNotAccepted,
        ActionTaken::ApplicationDenied,
        ActionTaken::PurchasedLoan,
        ActionTaken::PreapprovalDenied,
        ActionTaken::PreapprovalApprovedNotAccepted,
    ];

    /// Public LAR numeric code.
    pub fn code(self) -> u8 {
        match self {
            ActionTaken::LoanOriginated => 1,
            ActionTaken::ApprovedNotAccepted => 2,
            ActionTaken::ApplicationDenied => 3,
            ActionTaken::PurchasedLoan => 6,
            ActionTaken::PreapprovalDenied => 7,
            ActionTaken::PreapprovalApprovedNotAccepted => 8,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ActionTaken::LoanOriginated => "Loan Originated",
            ActionTaken::ApprovedNotAccepted => "Application approved but not accepted",
            ActionTaken::ApplicationDenied => "Application denied",
            ActionTaken::PurchasedLoan => "Purchased loan",
            ActionTaken::PreapprovalDenied => "Preapproval request denied",
            ActionTaken::PreapprovalApprovedNotAccepted => {
                "Preapproval request approved but not accepted"
            }
        }
    }

    /// Accepts either the numeric LAR code or the descriptive label
    /// (case-insensitive).
    pub fn parse(raw: &str) -> Result<Self> {
        let trimmed = raw.trim();
        ActionTaken::ALL
            .into_iter()
            .find(|a| trimmed == a.code().to_string() || trimmed.eq_ignore_ascii_case(a.label()))
            .ok_or_else(|| Error::UnknownAction(trimmed.to_string()))
    }

    pub fn outcome(self) -> LoanOutcome {
        match self {
            ActionTaken::ApplicationDenied | ActionTaken::PreapprovalDenied => LoanOutcome::Denied,
            _ => LoanOutcome::Approved,
        }
    }
}

pub fn map_action_to_outcome(action_label: &str) -> Result<LoanOutcome> {
    ActionTaken::parse(action_label).map(ActionTaken::outcome)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoanRecord {
    pub id: u64,
    /// Applicant income as reported (thousands of dollars in the public LAR).
    pub income: f64,
    pub applicant_sex: String,
    pub race: RaceCategory,
    pub occupancy_type: String,
    pub dwelling_category: String,
    pub loan_purpose: String,
    pub loan_type: String,
    /// Dollars.
    pub loan_amount: f64,
    /// Summary statistics only; never a model feature.
    pub interest_rate: Option<f64>,
    pub tract_population: f64,
    pub tract_minority_pct: f64,
    pub msa_median_income: f64,
    pub tract_to_msa_income_pct: f64,
    pub tract_owner_occupied: f64,
    pub tract_one_to_four_family: f64,
    pub outcome: LoanOutcome,
}

/// Column names for every field the pipeline reads.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SchemaConfig {
    pub race: String,
    pub ethnicity: String,
    pub action_taken: String,
    pub loan_amount: String,
    pub income: String,
    pub occupancy_type: String,
    pub dwelling_category: String,
    pub loan_purpose: String,
    pub loan_type: String,
    pub tract_population: String,
    pub tract_minority_pct: String,
    pub msa_median_income: String,
    pub tract_to_msa_income_pct: String,
    pub tract_owner_occupied: String,
    pub tract_one_to_four_family: String,
    pub interest_rate: String,
    pub applicant_sex: String,
    pub delimiter: char,
    /// Values treated as missing in any field.
    pub sentinels: Vec<String>,
}

impl Default for SchemaConfig {
    fn default() -> Self {
        SchemaConfig {
            race: "applicant_race_1".into(),
            ethnicity: "applicant_ethnicity_1".into(),
            action_taken: "action_taken".into(),
            loan_amount: "loan_amount".into(),
            income: "income".into(),
            occupancy_type: "occupancy_type".into(),
            dwelling_category: "derived_dwelling_category".into(),
            loan_purpose: "loan_purpose".into(),
            loan_type: "loan_type".into(),
            tract_population: "tract_population".into(),
            tract_minority_pct: "tract_minority_population_percent".into(),
            msa_median_income: "ffiec_msa_md_median_family_income".into(),
            tract_to_msa_income_pct: "tract_to_msa_income_percentage".into(),
            tract_owner_occupied: "tract_owner_occupied_units".into(),
            tract_one_to_four_family: "tract_one_to_four_family_homes".into(),
            interest_rate: "interest_rate".into(),
            applicant_sex: "derived_sex".into(),
            delimiter: ',',
            sentinels: vec!["NA".into(), "Exempt".into(), String::new()],
        }
    }
}

impl SchemaConfig {
    /// The columns a file must carry. A minimal file may omit the optional
    /// descriptive columns; see [`SchemaConfig::required_columns`].
    fn all_columns(&self) -> [(&'static str, &str); 17] {
        [
            ("race", &self.race),
            ("ethnicity", &self.ethnicity),
            ("action_taken", &self.action_taken),
            ("loan_amount", &self.loan_amount),
            ("income", &self.income),
            ("occupancy_type", &self.occupancy_type),
            ("dwelling_category", &self.dwelling_category),
            ("loan_purpose", &self.loan_purpose),
            ("loan_type", &self.loan_type),
            ("tract_population", &self.tract_population),
            ("tract_minority_pct", &self.tract_minority_pct),
            ("msa_median_income", &self.msa_median_income),
            ("tract_to_msa_income_pct", &self.tract_to_msa_income_pct),
            ("tract_owner_occupied", &self.tract_owner_occupied),
            ("tract_one_to_four_family", &self.tract_one_to_four_family),
            ("interest_rate", &self.interest_rate),
            ("applicant_sex", &self.applicant_sex),
        ]
    }

    /// Columns whose absence from the header is an error.
    pub fn required_columns(&self) -> Vec<&str> {
        vec![
            &self.race,
            &self.ethnicity,
            &self.action_taken,
            &self.loan_amount,
            &self.income,
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    MissingField,
    Unparseable,
    UnknownAction,
    OutOfRange,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DroppedRow {
    /// 1-based data line number (header excluded).
    pub line: usize,
    pub reason: DropReason,
    pub field: String,
}

#[derive(Debug, Clone)]
pub struct LarParse {
    pub records: Vec<LoanRecord>,
    pub dropped: Vec<DroppedRow>,
}

impl LarParse {
    pub fn drop_count(&self) -> usize {
        self.dropped.len()
    }

    pub fn drop_counts_by_reason(&self) -> BTreeMap<DropReason, usize> {
        let mut out = BTreeMap::new();
        for d in &self.dropped {
            *out.entry(d.reason).or_insert(0) += 1;
        }
        out
    }
}

pub fn parse_hmda_csv(path: impl AsRef<Path>, schema: &SchemaConfig) -> Result<LarParse> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_hmda_reader(file, schema)
}

pub fn parse_hmda_reader(reader: impl std::io::Read, schema: &SchemaConfig) -> Result<LarParse> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(schema.delimiter as u8)
        .flexible(false)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    let position = |name: &str| header.iter().position(|h| h.trim() == name);

    for name in schema.required_columns() {
        if position(name).is_none() {
            return Err(Error::MissingColumn(name.to_string()));
        }
    }
    let columns: BTreeMap<&'static str, Option<usize>> = schema
        .all_columns()
        .into_iter()
        .map(|(key, name)| (key, position(name)))
        .collect();

    let mut records = Vec::new();
    let mut dropped = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row?;
        let line = i + 1;
        let fields = RowView {
            row: &row,
            columns: &columns,
            sentinels: &schema.sentinels,
        };
        match fields.to_record(line as u64) {
            Ok(rec) => records.push(rec),
            Err((reason, field)) => dropped.push(DroppedRow {
                line,
                reason,
                field: field.to_string(),
            }),
        }
    }
    if !dropped.is_empty() {
        log::warn!(
            "dropped {} of {} rows",
            dropped.len(),
            dropped.len() + records.len()
        );
    }
    if records.is_empty() {
        return Err(Error::NoUsableRows {
            dropped: dropped.len(),
        });
    }
    Ok(LarParse { records, dropped })
}

struct RowView<'a> {
    row: &'a csv::StringRecord,
    columns: &'a BTreeMap<&'static str, Option<usize>>,
    sentinels: &'a [String],
}

type FieldResult<T> = std::result::Result<T, (DropReason, &'static str)>;

impl RowView<'_> {
    /// `Ok(None)` when the column is absent from the file or the value is a
    /// sentinel.
    fn raw(&self, key: &'static str) -> Option<&str> {
        let idx = (*self.columns.get(key)?)?;
        let v = self.row.get(idx)?.trim();
        if self.sentinels.iter().any(|s| s == v) {
            None
        } else {
            Some(v)
        }
    }

    /// Columns not present in the file default to an empty category
    /// ("" is a valid one-hot level) or zero; present-but-missing values drop
    /// the row.
    fn present(&self, key: &'static str) -> bool {
        matches!(self.columns.get(key), Some(Some(_)))
    }

    fn number(&self, key: &'static str) -> FieldResult<f64> {
        if !self.present(key) {
            return Ok(0.0);
        }
        let v = self.raw(key).ok_or((DropReason::MissingField, key))?;
        let x: f64 = v.parse().map_err(|_| (DropReason::Unparseable, key))?;
        if x.is_finite() {
            Ok(x)
        } else {
            Err((DropReason::Unparseable, key))
        }
    }

    fn category(&self, key: &'static str) -> FieldResult<String> {
        if !self.present(key) {
            return Ok(String::new());
        }
        self.raw(key)
            .map(str::to_string)
            .ok_or((DropReason::MissingField, key))
    }

    fn code(&self, key: &'static str) -> i32 {
        self.raw(key).and_then(|v| v.parse().ok()).unwrap_or(-1)
    }

    fn to_record(&self, id: u64) -> FieldResult<LoanRecord> {
        let action = self
            .raw("action_taken")
            .ok_or((DropReason::MissingField, "action_taken"))?;
        let outcome = map_action_to_outcome(action)
            .map_err(|_| (DropReason::UnknownAction, "action_taken"))?;
        let loan_amount = self.number("loan_amount")?;
        if loan_amount <= 0.0 {
            return Err((DropReason::OutOfRange, "loan_amount"));
        }
        let tract_minority_pct = self.number("tract_minority_pct")?;
        if !(0.0..=100.0).contains(&tract_minority_pct) {
            return Err((DropReason::OutOfRange, "tract_minority_pct"));
        }
        let interest_rate = if self.present("interest_rate") {
            self.raw("interest_rate")
                .and_then(|v| v.parse::<f64>().ok())
        } else {
            None
        };
        Ok(LoanRecord {
            id,
            income: self.number("income")?,
            applicant_sex: self.category("applicant_sex")?,
            race: categorize_race(self.code("race"), self.code("ethnicity")),
            occupancy_type: self.category("occupancy_type")?,
            dwelling_category: self.category("dwelling_category")?,
            loan_purpose: self.category("loan_purpose")?,
            loan_type: self.category("loan_type")?,
            loan_amount,
            interest_rate,
            tract_population: self.number("tract_population")?,
            tract_minority_pct,
            msa_median_income: self.number("msa_median_income")?,
            tract_to_msa_income_pct: self.number("tract_to_msa_income_pct")?,
            tract_owner_occupied: self.number("tract_owner_occupied")?,
            tract_one_to_four_family: self.number("tract_one_to_four_family")?,
            outcome,
        })
    }
}
