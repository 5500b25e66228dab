//! Binary soft-margin support vector classification, trained by sequential
//! minimal optimization on the box-constrained dual
//! `min 1/2 a'Qa - 1'a  s.t.  0 <= a_i <= C,  sum a_i l_i = 0`
//! with maximal-violating-pair working-set selection.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::kernel::{gaussian_kernel, KernelParams};
use crate::error::{Error, Result};

/// KKT violation gap guaranteed by a finished training run.
pub const KKT_TOL: f64 = 1e-6;

/// The solver is driven well below the guaranteed gap so that retrained
/// models reproduce decision values tightly.
const TRAIN_TOL: f64 = KKT_TOL * 1e-3;

/// A trained binary classifier: the retained support vectors, their signed
/// dual coefficients `alpha_i * l_i`, and the bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinarySvcModel {
    pub support_inputs: DMatrix<f64>,
    pub support_coeffs: Vec<f64>,
    pub bias: f64,
    pub penalty: f64,
    pub kernel: KernelParams,
    /// (positive-class id, negative-class id) in the caller's labelling.
    pub labels: (usize, usize),
}

impl BinarySvcModel {
    pub fn n_support(&self) -> usize {
        self.support_coeffs.len()
    }
}

/// Decision value `sum_i coeff_i k(sv_i, x) + b`; the predicted binary label
/// is its sign.
pub fn decision(model: &BinarySvcModel, x: &[f64]) -> f64 {
    let mut s = model.bias;
    for (i, coeff) in model.support_coeffs.iter().enumerate() {
        let row: Vec<f64> = model.support_inputs.row(i).iter().copied().collect();
        s += coeff * gaussian_kernel(&row, x, &model.kernel);
    }
    s
}

/// Dual solution together with the per-point alphas on the full training
/// set, used by the leave-one-out tuner.
#[derive(Debug, Clone)]
pub struct SmoSolution {
    pub alpha: Vec<f64>,
    pub bias: f64,
    pub iterations: usize,
}

pub(crate) fn gram_matrix(x: &DMatrix<f64>, params: &KernelParams) -> DMatrix<f64> {
    let n = x.nrows();
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| x.row(i).iter().copied().collect())
        .collect();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        k[(i, i)] = 1.0;
        for j in (i + 1)..n {
            let v = gaussian_kernel(&rows[i], &rows[j], params);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

/// Solve the dual on a precomputed Gram matrix to the training tolerance.
pub fn solve_smo(
    gram: &DMatrix<f64>,
    y: &[f64],
    c: f64,
    init: Option<&[f64]>,
) -> Result<SmoSolution> {
    solve_smo_tol(gram, y, c, init, TRAIN_TOL)
}

/// Solve the dual on a precomputed Gram matrix. `init` may carry a feasible
/// warm-start alpha (box-respecting, equality-balanced).
pub fn solve_smo_tol(
    gram: &DMatrix<f64>,
    y: &[f64],
    c: f64,
    init: Option<&[f64]>,
    tol: f64,
) -> Result<SmoSolution> {
    let n = y.len();
    if n < 2 {
        return Err(Error::invalid("need at least two training points"));
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::invalid(format!("penalty must be positive, got {c}")));
    }
    if y.iter().any(|&l| l != 1.0 && l != -1.0) {
        return Err(Error::invalid("labels must be -1 or +1"));
    }
    if y.iter().all(|&l| l == y[0]) {
        return Err(Error::invalid("both classes must be present"));
    }

    let mut alpha = match init {
        Some(a) if a.len() == n => a.to_vec(),
        _ => vec![0.0; n],
    };
    // gradient of the dual objective: G_i = (Q alpha)_i - 1
    let mut grad = vec![-1.0; n];
    if alpha.iter().any(|&a| a != 0.0) {
        for i in 0..n {
            let mut g = -1.0;
            for j in 0..n {
                if alpha[j] != 0.0 {
                    g += y[i] * y[j] * gram[(i, j)] * alpha[j];
                }
            }
            grad[i] = g;
        }
    }

    let max_iters = (1000 * n).max(100_000);
    let mut iterations = 0;
    let (m_up, m_low) = loop {
        // maximal violating pair over I_up / I_low
        let mut m_up = f64::NEG_INFINITY;
        let mut i_up = usize::MAX;
        let mut m_low = f64::INFINITY;
        let mut i_low = usize::MAX;
        for t in 0..n {
            let v = -y[t] * grad[t];
            let in_up = (y[t] > 0.0 && alpha[t] < c) || (y[t] < 0.0 && alpha[t] > 0.0);
            let in_low = (y[t] > 0.0 && alpha[t] > 0.0) || (y[t] < 0.0 && alpha[t] < c);
            if in_up && v > m_up {
                m_up = v;
                i_up = t;
            }
            if in_low && v < m_low {
                m_low = v;
                i_low = t;
            }
        }
        if m_up - m_low < tol || i_up == usize::MAX || i_low == usize::MAX {
            break (m_up, m_low);
        }
        if iterations >= max_iters {
            return Err(Error::numerical(format!(
                "dual optimization did not reach tolerance {tol:.0e} in {max_iters} \
                 iterations (gap {:.3e}, n = {n}, C = {c:.3e})",
                m_up - m_low
            )));
        }
        iterations += 1;

        let (i, j) = (i_up, i_low);
        let (old_i, old_j) = (alpha[i], alpha[j]);
        // curvature along the feasible direction is K_ii + K_jj - 2 K_ij
        // in both label configurations
        let quad = (gram[(i, i)] + gram[(j, j)] - 2.0 * gram[(i, j)]).max(1e-12);
        if y[i] != y[j] {
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else {
                if alpha[i] < 0.0 {
                    alpha[i] = 0.0;
                    alpha[j] = -diff;
                }
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = c + diff;
                }
            }
        } else {
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = sum;
                }
                if alpha[i] < 0.0 {
                    alpha[i] = 0.0;
                    alpha[j] = sum;
                }
            }
        }

        let di = alpha[i] - old_i;
        let dj = alpha[j] - old_j;
        for t in 0..n {
            grad[t] += y[t] * (y[i] * gram[(t, i)] * di + y[j] * gram[(t, j)] * dj);
        }
    };

    // bias from the free support vectors, falling back to the KKT midpoint
    let mut b_sum = 0.0;
    let mut b_count = 0usize;
    for t in 0..n {
        if alpha[t] > 1e-8 && alpha[t] < c - 1e-8 {
            b_sum += -y[t] * grad[t];
            b_count += 1;
        }
    }
    let bias = if b_count > 0 {
        b_sum / b_count as f64
    } else {
        (m_up + m_low) / 2.0
    };

    Ok(SmoSolution {
        alpha,
        bias,
        iterations,
    })
}

/// Train on `(x, y)` with `y` in {-1, +1}; `class_ids` records which caller
/// label each sign stands for.
pub fn train_binary(
    x: &DMatrix<f64>,
    y: &[f64],
    c: f64,
    params: &KernelParams,
    class_ids: (usize, usize),
) -> Result<BinarySvcModel> {
    if x.nrows() != y.len() {
        return Err(Error::invalid("input rows do not match label count"));
    }
    if x.ncols() != params.dimension() {
        return Err(Error::invalid(format!(
            "kernel has {} lengthscales for {} input columns",
            params.dimension(),
            x.ncols()
        )));
    }
    let gram = gram_matrix(x, params);
    let sol = solve_smo(&gram, y, c, None)?;

    let sv: Vec<usize> = (0..y.len()).filter(|&i| sol.alpha[i] > 1e-8).collect();
    let support_inputs = DMatrix::from_fn(sv.len(), x.ncols(), |i, j| x[(sv[i], j)]);
    let support_coeffs: Vec<f64> = sv.iter().map(|&i| sol.alpha[i] * y[i]).collect();
    Ok(BinarySvcModel {
        support_inputs,
        support_coeffs,
        bias: sol.bias,
        penalty: c,
        kernel: params.clone(),
        labels: class_ids,
    })
}
