//! Seeded generator for HMDA-schema test data with a planted disparity.
//!
//! Black applicants are the planted group. At strength `s` their log income
//! is shifted down by `2.4 * 0.45 * s` (0.45 is the log-income sd), their
//! tracts are more minority-heavy and poorer, and, holding income fixed,
//! their log-odds of denial are lowered by `1.5 * s`. The income shift
//! dominates, so the marginal denial rate of the group rises with `s`,
//! while a model that sees race can separate the group from the income
//! proxy. At `s = 0` group membership is independent of every other column.

use std::collections::BTreeMap;
use std::io::Write;

use lda_core::ingest::RaceCategory;
use lda_core::seed;
use lda_core::{Error, Result};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

pub const PLANTED_GROUP: RaceCategory = RaceCategory::Black;

const LOG_INCOME_SD: f64 = 0.45;
const INCOME_SHIFT: f64 = 2.4;
const DIRECT_EFFECT: f64 = -1.5;
const INTERCEPT: f64 = -1.4;
const INCOME_COEF: f64 = -1.6;
const LOAN_TO_INCOME_COEF: f64 = 0.8;

pub const HEADER: [&str; 17] = [
    "applicant_race_1",
    "applicant_ethnicity_1",
    "action_taken",
    "loan_amount",
    "income",
    "occupancy_type",
    "derived_dwelling_category",
    "loan_purpose",
    "loan_type",
    "tract_population",
    "tract_minority_population_percent",
    "ffiec_msa_md_median_family_income",
    "tract_to_msa_income_percentage",
    "tract_owner_occupied_units",
    "tract_one_to_four_family_homes",
    "interest_rate",
    "derived_sex",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub rows: usize,
    /// Planted disparity strength in `[0, 1]`.
    pub strength: f64,
    pub seed: u64,
    /// Relative frequency of each generated group.
    pub group_shares: BTreeMap<RaceCategory, f64>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            rows: 10_000,
            strength: 0.5,
            seed: 0,
            group_shares: BTreeMap::from([
                (RaceCategory::White, 0.60),
                (RaceCategory::Black, 0.20),
                (RaceCategory::Hispanic, 0.12),
                (RaceCategory::Asian, 0.08),
            ]),
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.rows == 0 {
            return bad("synthetic row count must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.strength) {
            return bad(format!(
                "strength must lie in [0, 1], got {}",
                self.strength
            ));
        }
        if self.group_shares.is_empty()
            || self
                .group_shares
                .values()
                .any(|w| !(w.is_finite() && *w >= 0.0))
            || self.group_shares.values().sum::<f64>() <= 0.0
        {
            return bad("group shares must be non-negative with a positive total".into());
        }
        if let Some(g) = self.group_shares.keys().find(|g| codes_for(**g).is_none()) {
            return bad(format!("cannot generate applicants for group {}", g.name()));
        }
        Ok(())
    }
}

/// A (race, ethnicity) code pair that categorizes as `group`.
fn codes_for(group: RaceCategory) -> Option<(&'static [i32], &'static [i32])> {
    const NON_HISP: &[i32] = &[2];
    Some(match group {
        RaceCategory::White => (&[5], NON_HISP),
        RaceCategory::Black => (&[3], NON_HISP),
        RaceCategory::Asian => (&[2, 21, 22, 23, 24, 25, 26, 27], NON_HISP),
        RaceCategory::OtherRace => (&[1, 4, 41, 42, 43, 44], NON_HISP),
        RaceCategory::RaceNotReported => (&[6], NON_HISP),
        RaceCategory::Hispanic => (&[5, 3, 6], &[1, 11, 12, 13, 14]),
        RaceCategory::NoneCategory => (&[7], &[3]),
    })
}

fn pick<'a, T, R: Rng>(rng: &mut R, xs: &'a [T]) -> &'a T {
    &xs[rng.random_range(0..xs.len())]
}

fn pick_weighted<'a, T, R: Rng>(rng: &mut R, xs: &'a [(T, f64)]) -> &'a T {
    let d = WeightedIndex::new(xs.iter().map(|x| x.1)).expect("static weights");
    &xs[d.sample(rng)].0
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Generated row as the string fields of [`HEADER`], plus its group.
pub struct SynthRow {
    pub group: RaceCategory,
    pub denied: bool,
    pub fields: Vec<String>,
}

pub fn generate(config: &SynthConfig) -> Result<Vec<SynthRow>> {
    config.validate()?;
    let groups: Vec<(RaceCategory, f64)> =
        config.group_shares.iter().map(|(g, w)| (*g, *w)).collect();
    let group_dist = WeightedIndex::new(groups.iter().map(|g| g.1))
        .map_err(|e| Error::InvalidParameter(format!("group shares: {e}")))?;
    let std = Normal::new(0.0, 1.0).expect("unit normal");
    let mut rng = seed::rng(config.seed, &[0x5717]);
    let s = config.strength;

    let mut rows = Vec::with_capacity(config.rows);
    for _ in 0..config.rows {
        let group = groups[group_dist.sample(&mut rng)].0;
        let m = if group == PLANTED_GROUP { 1.0 } else { 0.0 };
        let z_inc = std.sample(&mut rng) - INCOME_SHIFT * s * m;
        let z_lti = std.sample(&mut rng);

        let purpose = *pick_weighted(
            &mut rng,
            &[
                ("1", 0.5),
                ("31", 0.25),
                ("32", 0.12),
                ("2", 0.06),
                ("4", 0.07),
            ],
        );
        let loan_type = *pick_weighted(
            &mut rng,
            &[("1", 0.75), ("2", 0.15), ("3", 0.08), ("4", 0.02)],
        );
        let occupancy = *pick_weighted(&mut rng, &[("1", 0.88), ("2", 0.03), ("3", 0.09)]);
        let dwelling = *pick_weighted(
            &mut rng,
            &[
                ("Single Family (1-4 Units):Site-Built", 0.93),
                ("Single Family (1-4 Units):Manufactured", 0.04),
                ("Multifamily:Site-Built", 0.03),
            ],
        );
        let sex = *pick_weighted(
            &mut rng,
            &[
                ("Male", 0.38),
                ("Female", 0.25),
                ("Joint", 0.30),
                ("Sex Not Available", 0.07),
            ],
        );
        let categorical: f64 = match purpose {
            "2" => 0.6,
            "4" => 0.3,
            "32" => 0.2,
            _ => 0.0,
        } + match loan_type {
            "2" => 0.15,
            "3" => 0.1,
            _ => 0.0,
        } + if dwelling.ends_with("Manufactured") {
            0.5
        } else {
            0.0
        };

        let logit = INTERCEPT
            + INCOME_COEF * z_inc
            + LOAN_TO_INCOME_COEF * z_lti
            + categorical
            + DIRECT_EFFECT * s * m;
        let denied = rng.random::<f64>() < sigmoid(logit);

        let income = (90f64.ln() + LOG_INCOME_SD * z_inc).exp().round().max(1.0);
        let loan_amount = ((income * 2.8 * (0.35 * z_lti).exp()).round().max(5.0) * 1000.0) as i64;
        let minority = (30.0 + 40.0 * s * m + 15.0 * std.sample(&mut rng)).clamp(0.0, 100.0);
        let tract_income = (100.0 - 25.0 * s * m + 25.0 * std.sample(&mut rng)).clamp(20.0, 300.0);
        let population = (4500.0 + 1500.0 * std.sample(&mut rng))
            .clamp(200.0, 20_000.0)
            .round();
        let units = (population / 2.6).round();
        let owner = (units * rng.random_range(0.3..0.85)).round();
        let one_to_four = (units * rng.random_range(0.5..0.95)).round();
        let msa_income = *pick(&mut rng, &[61_300, 74_800, 83_200, 92_600, 108_900]);

        let (race_codes, eth_codes) = codes_for(group).expect("validated");
        let race = *pick(&mut rng, race_codes);
        let ethnicity = *pick(&mut rng, eth_codes);
        let action = if denied {
            *pick_weighted(&mut rng, &[(3, 0.9), (7, 0.1)])
        } else {
            *pick_weighted(&mut rng, &[(1, 0.8), (2, 0.1), (6, 0.07), (8, 0.03)])
        };
        let interest_rate = if action == 1 {
            format!(
                "{:.3}",
                (3.1 + 0.35 * std.sample(&mut rng) - 0.1 * z_inc).max(1.0)
            )
        } else {
            "NA".to_string()
        };

        rows.push(SynthRow {
            group,
            denied,
            fields: vec![
                race.to_string(),
                ethnicity.to_string(),
                action.to_string(),
                loan_amount.to_string(),
                format!("{income:.0}"),
                occupancy.to_string(),
                dwelling.to_string(),
                purpose.to_string(),
                loan_type.to_string(),
                format!("{population:.0}"),
                format!("{minority:.2}"),
                msa_income.to_string(),
                format!("{tract_income:.2}"),
                format!("{owner:.0}"),
                format!("{one_to_four:.0}"),
                interest_rate,
                sex.to_string(),
            ],
        });
    }
    Ok(rows)
}

pub fn write_csv<W: Write>(rows: &[SynthRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER)?;
    for r in rows {
        w.write_record(&r.fields)?;
    }
    w.flush()
        .map_err(|e| Error::InvalidParameter(format!("write failed: {e}")))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_params() {
        let c = SynthConfig {
            rows: 0,
            ..Default::default()
        };
        assert!(generate(&c).is_err());
        let c = SynthConfig {
            strength: 1.5,
            ..Default::default()
        };
        assert!(generate(&c).is_err());
        let mut c = SynthConfig::default();
        c.group_shares.clear();
        assert!(generate(&c).is_err());
    }

    #[test]
    fn seeded() {
        let c = SynthConfig {
            rows: 50,
            ..SynthConfig::default()
        };
        let a: Vec<_> = generate(&c)
            .unwrap()
            .into_iter()
            .map(|r| r.fields)
            .collect();
        let b: Vec<_> = generate(&c)
            .unwrap()
            .into_iter()
            .map(|r| r.fields)
            .collect();
        assert_eq!(a, b);
    }
}
