//! Unpenalized logistic regression fitted by Newton-Raphson (IRLS).
//!
//! The Hessian gets a 1e-10 diagonal jitter before the solve and the solve
//! itself is a pseudo-inverse, so collinear one-hot groups (which sum to the
//! intercept column) do not break the step. Neither changes the objective.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{labels_to_bits, require_both_classes};
use crate::encode::FeatureMatrix;
use crate::error::Result;
use crate::ingest::LoanOutcome;

const HESSIAN_JITTER: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LogisticParams {
    /// Convergence threshold on the max-norm of the log-likelihood gradient.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for LogisticParams {
    fn default() -> Self {
        LogisticParams {
            tol: 1e-8,
            max_iter: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub iterations: usize,
    pub converged: bool,
    pub gradient_max_norm: f64,
}

impl LogisticModel {
    pub fn linear_predictor(&self, x: &[f64]) -> f64 {
        self.intercept + dot(&self.weights, x)
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        sigmoid(self.linear_predictor(x))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// log(1 + e^z) without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Parameters are `[weights..., intercept]`.
pub fn log_likelihood(params: &[f64], x: &FeatureMatrix, y: &[bool]) -> f64 {
    let (w, b) = params.split_at(x.n_cols());
    x.rows()
        .zip(y)
        .map(|(row, &yi)| {
            let z = b[0] + dot(w, row);
            (if yi { z } else { 0.0 }) - softplus(z)
        })
        .sum()
}

/// Gradient of [`log_likelihood`].
pub fn gradient(params: &[f64], x: &FeatureMatrix, y: &[bool]) -> Vec<f64> {
    let d = x.n_cols();
    let (w, b) = params.split_at(d);
    let mut g = vec![0.0; d + 1];
    for (row, &yi) in x.rows().zip(y) {
        let r = f64::from(u8::from(yi)) - sigmoid(b[0] + dot(w, row));
        for (gj, xj) in g.iter_mut().zip(row) {
            *gj += r * xj;
        }
        g[d] += r;
    }
    g
}

fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn hessian(params: &[f64], x: &FeatureMatrix) -> DMatrix<f64> {
    let d = x.n_cols();
    let (w, b) = params.split_at(d);
    let mut h = DMatrix::<f64>::zeros(d + 1, d + 1);
    let mut xt = vec![0.0; d + 1];
    for row in x.rows() {
        let p = sigmoid(b[0] + dot(w, row));
        let wgt = p * (1.0 - p);
        if wgt == 0.0 {
            continue;
        }
        xt[..d].copy_from_slice(row);
        xt[d] = 1.0;
        for i in 0..=d {
            let a = wgt * xt[i];
            if a == 0.0 {
                continue;
            }
            for j in i..=d {
                h[(i, j)] += a * xt[j];
            }
        }
    }
    for i in 0..=d {
        for j in 0..i {
            h[(i, j)] = h[(j, i)];
        }
        h[(i, i)] += HESSIAN_JITTER;
    }
    h
}

pub fn fit(x: &FeatureMatrix, labels: &[LoanOutcome], p: &LogisticParams) -> Result<LogisticModel> {
    require_both_classes(labels)?;
    if x.n_rows() < 2 {
        return Err(crate::error::Error::InvalidParameter(
            "logistic regression needs at least 2 rows".into(),
        ));
    }
    let y = labels_to_bits(labels);
    let d = x.n_cols();
    let mut params = vec![0.0; d + 1];
    // Start at the intercept-only MLE.
    let rate = y.iter().filter(|&&v| v).count() as f64 / y.len() as f64;
    params[d] = (rate / (1.0 - rate)).ln();

    let mut ll = log_likelihood(&params, x, &y);
    let mut g = gradient(&params, x, &y);
    let mut iterations = 0;
    while max_norm(&g) > p.tol && iterations < p.max_iter {
        iterations += 1;
        let h = hessian(&params, x);
        let step = h
            .svd(true, true)
            .solve(&DVector::from_column_slice(&g), 1e-12)
            .map_err(|e| crate::error::Error::InvalidParameter(e.to_string()))?;

        // Step halving keeps the likelihood monotone.
        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let trial: Vec<f64> = params
                .iter()
                .zip(step.iter())
                .map(|(a, s)| a + scale * s)
                .collect();
            let trial_ll = log_likelihood(&trial, x, &y);
            // Near the optimum a Newton step moves the likelihood by less
            // than the rounding error of summing it.
            let slack = 1e-12 * ll.abs().max(1.0);
            if trial_ll >= ll - slack || !ll.is_finite() {
                params = trial;
                ll = trial_ll;
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        g = gradient(&params, x, &y);
        if !accepted {
            break;
        }
    }
    let gradient_max_norm = max_norm(&g);
    let converged = gradient_max_norm <= p.tol;
    if !converged {
        log::warn!(
            "logistic regression stopped after {iterations} iterations with gradient max-norm {gradient_max_norm:.3e}"
        );
    }
    let intercept = params.pop().unwrap_or(0.0);
    Ok(LogisticModel {
        weights: params,
        intercept,
        iterations,
        converged,
        gradient_max_norm,
    })
}
