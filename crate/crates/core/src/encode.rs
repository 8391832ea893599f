//! Feature encoding.
//!
//! Categorical fields become one-hot groups; numeric fields are standardized
//! with the population mean and standard deviation of the rows the encoder
//! was fitted on. `interest_rate` never becomes a column.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::LoanRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceFeature {
    Income,
    ApplicantSex,
    Race,
    OccupancyType,
    DwellingCategory,
    LoanPurpose,
    LoanType,
    LoanAmount,
    TractPopulation,
    TractMinorityPct,
    MsaMedianIncome,
    TractToMsaIncomePct,
    TractOwnerOccupied,
    TractOneToFourFamily,
}

impl SourceFeature {
    /// Model features in column order.
    pub const ALL: [SourceFeature; 14] = [
        SourceFeature::Income,
        SourceFeature::ApplicantSex,
        SourceFeature::Race,
        SourceFeature::OccupancyType,
        SourceFeature::DwellingCategory,
        SourceFeature::LoanPurpose,
        SourceFeature::LoanType,
        SourceFeature::LoanAmount,
        SourceFeature::TractPopulation,
        SourceFeature::TractMinorityPct,
        SourceFeature::MsaMedianIncome,
        SourceFeature::TractToMsaIncomePct,
        SourceFeature::TractOwnerOccupied,
        SourceFeature::TractOneToFourFamily,
    ];

    pub fn is_categorical(self) -> bool {
        matches!(
            self,
            SourceFeature::ApplicantSex
                | SourceFeature::Race
                | SourceFeature::OccupancyType
                | SourceFeature::DwellingCategory
                | SourceFeature::LoanPurpose
                | SourceFeature::LoanType
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            SourceFeature::Income => "income",
            SourceFeature::ApplicantSex => "applicant_sex",
            SourceFeature::Race => "race",
            SourceFeature::OccupancyType => "occupancy_type",
            SourceFeature::DwellingCategory => "dwelling_category",
            SourceFeature::LoanPurpose => "loan_purpose",
            SourceFeature::LoanType => "loan_type",
            SourceFeature::LoanAmount => "loan_amount",
            SourceFeature::TractPopulation => "tract_population",
            SourceFeature::TractMinorityPct => "tract_minority_pct",
            SourceFeature::MsaMedianIncome => "msa_median_income",
            SourceFeature::TractToMsaIncomePct => "tract_to_msa_income_pct",
            SourceFeature::TractOwnerOccupied => "tract_owner_occupied",
            SourceFeature::TractOneToFourFamily => "tract_one_to_four_family",
        }
    }

    fn category(self, r: &LoanRecord) -> &str {
        match self {
            SourceFeature::ApplicantSex => &r.applicant_sex,
            SourceFeature::Race => r.race.name(),
            SourceFeature::OccupancyType => &r.occupancy_type,
            SourceFeature::DwellingCategory => &r.dwelling_category,
            SourceFeature::LoanPurpose => &r.loan_purpose,
            SourceFeature::LoanType => &r.loan_type,
            _ => unreachable!("{self:?} is numeric"),
        }
    }

    fn value(self, r: &LoanRecord) -> f64 {
        match self {
            SourceFeature::Income => r.income,
            SourceFeature::LoanAmount => r.loan_amount,
            SourceFeature::TractPopulation => r.tract_population,
            SourceFeature::TractMinorityPct => r.tract_minority_pct,
            SourceFeature::MsaMedianIncome => r.msa_median_income,
            SourceFeature::TractToMsaIncomePct => r.tract_to_msa_income_pct,
            SourceFeature::TractOwnerOccupied => r.tract_owner_occupied,
            SourceFeature::TractOneToFourFamily => r.tract_one_to_four_family,
            _ => unreachable!("{self:?} is categorical"),
        }
    }
}

impl fmt::Display for SourceFeature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Which demographic fields enter the matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSet {
    pub include_race: bool,
    pub include_sex_and_tract_minority: bool,
}

impl FeatureSet {
    pub const ALL: FeatureSet = FeatureSet {
        include_race: true,
        include_sex_and_tract_minority: true,
    };
    pub const DEMOGRAPHIC_BLIND: FeatureSet = FeatureSet {
        include_race: false,
        include_sex_and_tract_minority: false,
    };
    /// Race dropped, every other field kept.
    pub const RACE_ONLY_BLIND: FeatureSet = FeatureSet {
        include_race: false,
        include_sex_and_tract_minority: true,
    };

    pub fn includes(self, f: SourceFeature) -> bool {
        match f {
            SourceFeature::Race => self.include_race,
            SourceFeature::ApplicantSex | SourceFeature::TractMinorityPct => {
                self.include_sex_and_tract_minority
            }
            _ => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Encoding {
    OneHot { category: String },
    Standardized { mean: f64, scale: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub source: SourceFeature,
    #[serde(flatten)]
    pub encoding: Encoding,
}

impl ColumnSpec {
    pub fn name(&self) -> String {
        match &self.encoding {
            Encoding::OneHot { category } => format!("{}={}", self.source, category),
            Encoding::Standardized { .. } => self.source.to_string(),
        }
    }
}

/// Row-major dense matrix with its column provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    n_rows: usize,
    columns: Vec<ColumnSpec>,
    data: Vec<f64>,
}

impl FeatureMatrix {
    /// Matrix with anonymous numeric columns, for model code and tests that
    /// do not start from loan records.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_cols) {
            return Err(Error::LengthMismatch("ragged feature rows".into()));
        }
        let columns = (0..n_cols)
            .map(|_| ColumnSpec {
                source: SourceFeature::Income,
                encoding: Encoding::Standardized {
                    mean: 0.0,
                    scale: 1.0,
                },
            })
            .collect();
        Ok(FeatureMatrix {
            n_rows: rows.len(),
            columns,
            data: rows.concat(),
        })
    }

    pub fn from_flat(n_rows: usize, columns: Vec<ColumnSpec>, data: Vec<f64>) -> Result<Self> {
        if data.len() != n_rows * columns.len() {
            return Err(Error::LengthMismatch(format!(
                "{} values for {n_rows}x{} matrix",
                data.len(),
                columns.len()
            )));
        }
        Ok(FeatureMatrix {
            n_rows,
            columns,
            data,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[ColumnSpec] {
        &self.columns
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.n_cols();
        &self.data[i * d..(i + 1) * d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.n_rows).map(move |i| self.row(i))
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.n_cols() + col]
    }

    pub fn has_race_columns(&self) -> bool {
        self.columns.iter().any(|c| c.source == SourceFeature::Race)
    }

    /// Category whose one-hot column is active in `row`, if `source` is
    /// encoded.
    pub fn decode_category(&self, row: usize, source: SourceFeature) -> Option<&str> {
        self.columns
            .iter()
            .enumerate()
            .find_map(|(j, c)| match &c.encoding {
                Encoding::OneHot { category } if c.source == source && self.get(row, j) == 1.0 => {
                    Some(category.as_str())
                }
                _ => None,
            })
    }

    pub fn check_finite(&self) -> Result<()> {
        match self.data.iter().position(|v| !v.is_finite()) {
            Some(p) => Err(Error::NonFinite {
                row: p / self.n_cols().max(1),
                col: p % self.n_cols().max(1),
            }),
            None => Ok(()),
        }
    }
}

/// Column layout plus standardization statistics, fitted once and applied to
/// any record set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureEncoder {
    pub feature_set: FeatureSet,
    pub columns: Vec<ColumnSpec>,
}

impl FeatureEncoder {
    /// Standardization statistics come from `stats_rows` only; one-hot levels
    /// are the union of categories seen in `stats_rows` and `vocab_rows`.
    pub fn fit(
        stats_rows: &[LoanRecord],
        vocab_rows: &[LoanRecord],
        feature_set: FeatureSet,
    ) -> Result<Self> {
        if stats_rows.is_empty() {
            return Err(Error::EmptyTrainingSet);
        }
        let mut columns = Vec::new();
        for source in SourceFeature::ALL {
            if !feature_set.includes(source) {
                continue;
            }
            if source.is_categorical() {
                let levels: BTreeSet<&str> = stats_rows
                    .iter()
                    .chain(vocab_rows)
                    .map(|r| source.category(r))
                    .collect();
                columns.extend(levels.into_iter().map(|c| ColumnSpec {
                    source,
                    encoding: Encoding::OneHot {
                        category: c.to_string(),
                    },
                }));
            } else {
                let n = stats_rows.len() as f64;
                let mean = stats_rows.iter().map(|r| source.value(r)).sum::<f64>() / n;
                let var = stats_rows
                    .iter()
                    .map(|r| (source.value(r) - mean).powi(2))
                    .sum::<f64>()
                    / n;
                let scale = if var > 0.0 {
                    var.sqrt()
                } else {
                    log::warn!("column {source} is constant; centering with unit scale");
                    1.0
                };
                columns.push(ColumnSpec {
                    source,
                    encoding: Encoding::Standardized { mean, scale },
                });
            }
        }
        Ok(FeatureEncoder {
            feature_set,
            columns,
        })
    }

    /// Rows whose category was never seen at fit time get an all-zero group.
    pub fn transform(&self, records: &[LoanRecord]) -> FeatureMatrix {
        let mut data = Vec::with_capacity(records.len() * self.columns.len());
        let mut unseen = 0usize;
        for r in records {
            let mut groups_hit: BTreeSet<SourceFeature> = BTreeSet::new();
            for c in &self.columns {
                let v = match &c.encoding {
                    Encoding::OneHot { category } => {
                        let hit = c.source.category(r) == category;
                        if hit {
                            groups_hit.insert(c.source);
                        }
                        f64::from(u8::from(hit))
                    }
                    Encoding::Standardized { mean, scale } => (c.source.value(r) - mean) / scale,
                };
                data.push(v);
            }
            let groups = self
                .columns
                .iter()
                .filter(|c| matches!(c.encoding, Encoding::OneHot { .. }))
                .map(|c| c.source)
                .collect::<BTreeSet<_>>();
            unseen += groups.len() - groups_hit.len();
        }
        if unseen > 0 {
            log::warn!("{unseen} categorical values were not seen when the encoder was fitted");
        }
        FeatureMatrix {
            n_rows: records.len(),
            columns: self.columns.clone(),
            data,
        }
    }
}

/// Fit an encoder on `records` and encode them.
pub fn encode_features(
    records: &[LoanRecord],
    include_race: bool,
    include_sex_and_tract_minority: bool,
) -> Result<FeatureMatrix> {
    let set = FeatureSet {
        include_race,
        include_sex_and_tract_minority,
    };
    Ok(FeatureEncoder::fit(records, &[], set)?.transform(records))
}
