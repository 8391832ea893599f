//! Single capped lender.
//!
//! Applications are ranked by repayment probability (highest first) and
//! approved greedily while the running total fits under the cap. An
//! application that does not fit is skipped and the scan continues, so a
//! smaller, lower-ranked loan can still use the remaining budget.
//!
//! Amounts are integer cents; expected values are floating-point currency.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::fairness::Group;
use crate::ingest::RaceCategory;

/// Currency amount in integer cents.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Cents(pub i64);

impl Cents {
    pub fn from_units(units: f64) -> Self {
        Cents((units * 100.0).round() as i64)
    }

    pub fn units(self) -> f64 {
        self.0 as f64 / 100.0
    }
}

impl fmt::Display for Cents {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let a = self.0.unsigned_abs();
        write!(f, "{sign}{}.{:02}", a / 100, a % 100)
    }
}

impl std::str::FromStr for Cents {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParameter(format!("not a currency amount: `{s}`"));
        let t = s.trim();
        let (neg, t) = t.strip_prefix('-').map_or((false, t), |r| (true, r));
        let (whole, frac) = t.split_once('.').unwrap_or((t, ""));
        if whole.is_empty() || frac.len() > 2 || !frac.chars().all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        let whole: i64 = whole.parse().map_err(|_| bad())?;
        let frac: i64 = if frac.is_empty() {
            0
        } else {
            format!("{frac:0<2}").parse().map_err(|_| bad())?
        };
        let v = whole
            .checked_mul(100)
            .and_then(|w| w.checked_add(frac))
            .ok_or_else(bad)?;
        Ok(Cents(if neg { -v } else { v }))
    }
}

impl Serialize for Cents {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Cents {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

pub const DEFAULT_CAP: Cents = Cents(1_000_000_000 * 100);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoanApplication {
    pub id: u64,
    pub amount: Cents,
    pub repay_prob: f64,
    pub group: RaceCategory,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct GroupOutcome {
    pub applications: usize,
    pub denied: usize,
}

impl GroupOutcome {
    pub fn denial_rate(&self) -> Option<f64> {
        (self.applications > 0).then(|| self.denied as f64 / self.applications as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortfolioResult {
    /// Ids in approval order.
    pub approved: Vec<u64>,
    pub denied: Vec<u64>,
    pub total_amount_approved: Cents,
    pub expected_value: f64,
    pub cap: Cents,
    pub uniform_rate: f64,
    pub groups: BTreeMap<RaceCategory, GroupOutcome>,
}

impl PortfolioResult {
    pub fn group_denial_rates(&self) -> BTreeMap<RaceCategory, f64> {
        self.groups
            .iter()
            .filter_map(|(g, o)| o.denial_rate().map(|r| (*g, r)))
            .collect()
    }
}

/// Reduced expected value: repayment probability times repayment amount.
/// The default-loss term is dropped.
pub fn expected_value(repay_prob: f64, repayment_amount: f64) -> f64 {
    repay_prob * repayment_amount
}

/// Applications in approval-priority order.
pub fn priority_order(apps: &[LoanApplication]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..apps.len()).collect();
    order.sort_by(|&a, &b| {
        let (x, y) = (&apps[a], &apps[b]);
        y.repay_prob
            .total_cmp(&x.repay_prob)
            .then(x.amount.cmp(&y.amount))
            .then(x.id.cmp(&y.id))
    });
    order
}

pub fn rank_and_approve(
    apps: &[LoanApplication],
    cap: Cents,
    uniform_rate: f64,
) -> Result<PortfolioResult> {
    if cap.0 <= 0 {
        return Err(Error::InvalidParameter(format!(
            "cap must be positive, got {cap}"
        )));
    }
    if uniform_rate.is_nan() || uniform_rate < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "uniform rate must be non-negative, got {uniform_rate}"
        )));
    }
    let mut remaining = cap.0;
    let mut approved = Vec::new();
    let mut denied = Vec::new();
    let mut total = 0i64;
    let mut ev = 0.0;
    let mut groups: BTreeMap<RaceCategory, GroupOutcome> = BTreeMap::new();
    for i in priority_order(apps) {
        let a = &apps[i];
        let g = groups.entry(a.group).or_default();
        g.applications += 1;
        if a.amount.0 <= remaining {
            remaining -= a.amount.0;
            total += a.amount.0;
            ev += expected_value(a.repay_prob, a.amount.units() * (1.0 + uniform_rate));
            approved.push(a.id);
        } else {
            g.denied += 1;
            denied.push(a.id);
        }
    }
    Ok(PortfolioResult {
        approved,
        denied,
        total_amount_approved: Cents(total),
        expected_value: ev,
        cap,
        uniform_rate,
        groups,
    })
}

/// Share of `group`'s applications that were not approved; `None` when the
/// group has no applications.
pub fn negative_impact(result: &PortfolioResult, group: Group) -> Option<f64> {
    let mut agg = GroupOutcome::default();
    for (race, o) in &result.groups {
        if group.contains(*race) {
            agg.applications += o.applications;
            agg.denied += o.denied;
        }
    }
    agg.denial_rate()
}
