//! Sigmoid calibration of decision values into posterior probabilities,
//! fitted by the regularized maximum-likelihood Newton scheme with the
//! robust target values `t+ = (N+ + 1)/(N+ + 2)`, `t- = 1/(N- + 2)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Calibrated sigmoid `P(l = +1 | f) = 1 / (1 + exp(A f + B))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlattCalibration {
    pub slope: f64,
    pub intercept: f64,
}

impl PlattCalibration {
    /// Probability of the positive class given a decision value, evaluated
    /// with the numerically stable split and clamped into the open unit
    /// interval so extreme decisions never round to exactly 0 or 1.
    pub fn probability(&self, decision: f64) -> f64 {
        let z = self.slope * decision + self.intercept;
        let p = if z >= 0.0 {
            (-z).exp() / (1.0 + (-z).exp())
        } else {
            1.0 / (1.0 + z.exp())
        };
        p.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
    }
}

/// Cross-entropy of the sigmoid against the robust targets.
fn objective(decisions: &[f64], targets: &[f64], a: f64, b: f64) -> f64 {
    let mut fval = 0.0;
    for (&f, &t) in decisions.iter().zip(targets) {
        let z = a * f + b;
        if z >= 0.0 {
            fval += t * z + (1.0 + (-z).exp()).ln();
        } else {
            fval += (t - 1.0) * z + (1.0 + z.exp()).ln();
        }
    }
    fval
}

/// Fit the sigmoid coefficients by Newton iteration with backtracking.
pub fn fit_platt(decisions: &[f64], labels: &[f64]) -> Result<PlattCalibration> {
    fit_platt_with(decisions, labels, true)
}

/// As `fit_platt`, optionally replacing the regularized targets with plain
/// 0/1 targets (only sensible on out-of-sample decision values).
pub fn fit_platt_with(
    decisions: &[f64],
    labels: &[f64],
    robust_targets: bool,
) -> Result<PlattCalibration> {
    if decisions.len() != labels.len() {
        return Err(Error::invalid("decision and label lengths differ"));
    }
    if labels.iter().any(|&l| l != 1.0 && l != -1.0) {
        return Err(Error::invalid("labels must be -1 or +1"));
    }
    let n_pos = labels.iter().filter(|&&l| l > 0.0).count() as f64;
    let n_neg = labels.len() as f64 - n_pos;
    if n_pos == 0.0 || n_neg == 0.0 {
        return Err(Error::invalid("both classes must be present"));
    }

    let (hi, lo) = if robust_targets {
        ((n_pos + 1.0) / (n_pos + 2.0), 1.0 / (n_neg + 2.0))
    } else {
        (1.0, 0.0)
    };
    let targets: Vec<f64> = labels
        .iter()
        .map(|&l| if l > 0.0 { hi } else { lo })
        .collect();

    let sigma = 1e-12;
    let min_step = 1e-10;
    let mut a = 0.0;
    let mut b = ((n_neg + 1.0) / (n_pos + 1.0)).ln();
    let mut fval = objective(decisions, &targets, a, b);

    for _ in 0..100 {
        let (mut h11, mut h22) = (sigma, sigma);
        let (mut h21, mut g1, mut g2) = (0.0, 0.0, 0.0);
        for (&f, &t) in decisions.iter().zip(&targets) {
            let z = a * f + b;
            let (p, q) = if z >= 0.0 {
                let e = (-z).exp();
                (e / (1.0 + e), 1.0 / (1.0 + e))
            } else {
                let e = z.exp();
                (1.0 / (1.0 + e), e / (1.0 + e))
            };
            let d2 = p * q;
            h11 += f * f * d2;
            h22 += d2;
            h21 += f * d2;
            let d1 = t - p;
            g1 += f * d1;
            g2 += d1;
        }
        if g1.abs() < 1e-5 && g2.abs() < 1e-5 {
            break;
        }

        let det = h11 * h22 - h21 * h21;
        let da = -(h22 * g1 - h21 * g2) / det;
        let db = -(-h21 * g1 + h11 * g2) / det;
        let gd = g1 * da + g2 * db;

        let mut step = 1.0;
        loop {
            let (na, nb) = (a + step * da, b + step * db);
            let nf = objective(decisions, &targets, na, nb);
            if nf < fval + 1e-4 * step * gd {
                a = na;
                b = nb;
                fval = nf;
                break;
            }
            step /= 2.0;
            if step < min_step {
                return Err(Error::numerical(
                    "sigmoid calibration line search failed to make progress",
                ));
            }
        }
    }

    Ok(PlattCalibration {
        slope: a,
        intercept: b,
    })
}
