//! Gaussian naive Bayes with per-class, per-feature normal likelihoods.

use serde::{Deserialize, Serialize};

use super::require_both_classes;
use crate::encode::FeatureMatrix;
use crate::error::Result;
use crate::ingest::LoanOutcome;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NaiveBayesParams {
    /// Variance floor as a fraction of the largest feature variance.
    pub var_smoothing_ratio: f64,
}

impl Default for NaiveBayesParams {
    fn default() -> Self {
        NaiveBayesParams {
            var_smoothing_ratio: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassGaussians {
    pub prior: f64,
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
}

impl ClassGaussians {
    fn log_joint(&self, x: &[f64]) -> f64 {
        let ln_2pi = (2.0 * std::f64::consts::PI).ln();
        self.prior.ln()
            + self
                .means
                .iter()
                .zip(&self.variances)
                .zip(x)
                .map(|((m, v), xi)| -0.5 * (ln_2pi + v.ln()) - (xi - m).powi(2) / (2.0 * v))
                .sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaiveBayesModel {
    pub approved: ClassGaussians,
    pub denied: ClassGaussians,
    pub variance_floor: f64,
}

impl NaiveBayesModel {
    /// `(P(Approved | x), P(Denied | x))`, each computed from the log-odds.
    pub fn posteriors(&self, x: &[f64]) -> (f64, f64) {
        let la = self.approved.log_joint(x);
        let ld = self.denied.log_joint(x);
        let p_denied = 1.0 / (1.0 + (la - ld).exp());
        let p_approved = 1.0 / (1.0 + (ld - la).exp());
        (p_approved, p_denied)
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        self.posteriors(x).1
    }
}

fn class_stats(x: &FeatureMatrix, rows: &[usize], n_total: usize, floor: f64) -> ClassGaussians {
    let d = x.n_cols();
    let n = rows.len() as f64;
    let mut means = vec![0.0; d];
    for &i in rows {
        for (m, v) in means.iter_mut().zip(x.row(i)) {
            *m += v;
        }
    }
    means.iter_mut().for_each(|m| *m /= n);
    let mut variances = vec![0.0; d];
    for &i in rows {
        for ((s, v), m) in variances.iter_mut().zip(x.row(i)).zip(&means) {
            *s += (v - m).powi(2);
        }
    }
    variances.iter_mut().for_each(|s| *s = (*s / n).max(floor));
    ClassGaussians {
        prior: n / n_total as f64,
        means,
        variances,
    }
}

pub fn fit(
    x: &FeatureMatrix,
    labels: &[LoanOutcome],
    p: &NaiveBayesParams,
) -> Result<NaiveBayesModel> {
    require_both_classes(labels)?;
    let n = x.n_rows();
    let max_var = (0..x.n_cols())
        .map(|j| {
            let mean = (0..n).map(|i| x.get(i, j)).sum::<f64>() / n as f64;
            (0..n).map(|i| (x.get(i, j) - mean).powi(2)).sum::<f64>() / n as f64
        })
        .fold(0.0, f64::max);
    // With every feature constant there is no scale to borrow; fall back to 1.
    let variance_floor = p.var_smoothing_ratio * if max_var > 0.0 { max_var } else { 1.0 };
    let (denied, approved): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| labels[i].is_denied());
    Ok(NaiveBayesModel {
        approved: class_stats(x, &approved, n, variance_floor),
        denied: class_stats(x, &denied, n, variance_floor),
        variance_floor,
    })
}
