//! Reconstruction of full multi-class posteriors from pairwise
//! probabilities. The pairwise values define a positive transition matrix
//! whose stationary distribution is the sought posterior; it is found by
//! the fixed-point iteration
//! `p_i <- 1/(K-1) sum_{j != i} p_ij (p_i + p_j)`
//! initialized from the normalized average of the partial probabilities.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct CoupledPosteriors {
    pub probs: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// `pairwise[(i, j)]` holds `p_ij` for `i != j`; the diagonal is ignored.
/// Requires every off-diagonal entry in (0, 1) with `p_ji = 1 - p_ij`.
pub fn coupled_posteriors(
    pairwise: &DMatrix<f64>,
    tol: f64,
    max_iters: usize,
) -> Result<CoupledPosteriors> {
    let k = pairwise.nrows();
    if k < 2 || pairwise.ncols() != k {
        return Err(Error::invalid("pairwise matrix must be square with K >= 2"));
    }
    for i in 0..k {
        for j in 0..k {
            if i == j {
                continue;
            }
            let p = pairwise[(i, j)];
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::invalid(format!(
                    "pairwise probability p[{i},{j}] = {p} must lie strictly inside (0, 1)"
                )));
            }
            if (pairwise[(i, j)] + pairwise[(j, i)] - 1.0).abs() > 1e-6 {
                return Err(Error::invalid(format!(
                    "pairwise probabilities must satisfy p_ji = 1 - p_ij at ({i}, {j})"
                )));
            }
        }
    }

    // initial estimate: average of the partial probabilities, normalized
    let mut p: Vec<f64> = (0..k)
        .map(|i| {
            (0..k)
                .filter(|&j| j != i)
                .map(|j| pairwise[(i, j)])
                .sum::<f64>()
                * 2.0
                / (k as f64 * (k as f64 - 1.0))
        })
        .collect();
    let total: f64 = p.iter().sum();
    for v in &mut p {
        *v /= total;
    }

    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iters {
        iterations += 1;
        let mut next: Vec<f64> = (0..k)
            .map(|i| {
                (0..k)
                    .filter(|&j| j != i)
                    .map(|j| pairwise[(i, j)] * (p[i] + p[j]))
                    .sum::<f64>()
                    / (k as f64 - 1.0)
            })
            .collect();
        let total: f64 = next.iter().sum();
        for v in &mut next {
            *v /= total;
        }
        let delta = p
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        p = next;
        if delta < tol {
            converged = true;
            break;
        }
    }

    Ok(CoupledPosteriors {
        probs: p,
        iterations,
        converged,
    })
}

/// The transition matrix whose stationary vector solves the coupled system.
pub fn transition_matrix(pairwise: &DMatrix<f64>) -> DMatrix<f64> {
    let k = pairwise.nrows();
    let denom = k as f64 - 1.0;
    DMatrix::from_fn(k, k, |i, j| {
        if i != j {
            pairwise[(i, j)] / denom
        } else {
            (0..k)
                .filter(|&l| l != i)
                .map(|l| pairwise[(i, l)])
                .sum::<f64>()
                / denom
        }
    })
}

/// Max-norm residual of the stationarity equation `p = T p`.
pub fn fixed_point_residual(pairwise: &DMatrix<f64>, probs: &[f64]) -> f64 {
    let t = transition_matrix(pairwise);
    let p = nalgebra::DVector::from_row_slice(probs);
    let tp = &t * &p;
    (0..probs.len())
        .map(|i| (tp[i] - p[i]).abs())
        .fold(0.0f64, f64::max)
}
