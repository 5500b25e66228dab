//! Shared generalized-least-squares machinery behind the plain and
//! categorical Kriging models.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Factorized state of a fitted Kriging model: trend coefficients, process
/// variance and the solves reused by every prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KrigingCore {
    pub beta_hat: DVector<f64>,
    pub sigma2_hat: f64,
    /// Diagonal inflation actually applied to the correlation matrix.
    pub nugget: f64,
    /// Lower Cholesky factor of `R + nugget I`.
    pub chol_l: DMatrix<f64>,
    /// Vandermonde matrix of the trend basis, `n0 x p`.
    pub f_mat: DMatrix<f64>,
    /// `R^{-1} (Y - F beta_hat)`.
    pub rinv_resid: DVector<f64>,
    /// `R^{-1} F`.
    pub rinv_f: DMatrix<f64>,
    /// Lower Cholesky factor of `F^T R^{-1} F`.
    pub fri_chol_l: DMatrix<f64>,
    /// Full profile negative log marginal likelihood at this fit.
    pub neg_log_likelihood: f64,
}

/// Build all factorized pieces from a unit-diagonal correlation matrix, a
/// trend matrix and the responses. On Cholesky failure the diagonal
/// inflation escalates by factors of 10 up to 1e-4.
pub fn assemble(
    corr: &DMatrix<f64>,
    f_mat: &DMatrix<f64>,
    y: &DVector<f64>,
    nugget: f64,
) -> Result<KrigingCore> {
    let n0 = corr.nrows();
    let p = f_mat.ncols();
    debug_assert_eq!(f_mat.nrows(), n0);
    debug_assert_eq!(y.len(), n0);

    let mut delta = nugget.max(0.0);
    let chol = loop {
        let mut r = corr.clone();
        for i in 0..n0 {
            r[(i, i)] += delta;
        }
        match nalgebra::Cholesky::new(r) {
            Some(c) => break (c, delta),
            None => {
                let next = if delta <= 0.0 { 1e-10 } else { delta * 10.0 };
                if next > 1e-4 {
                    return Err(Error::numerical(format!(
                        "correlation matrix not positive definite even with jitter {delta:.1e}"
                    )));
                }
                delta = next;
            }
        }
    };
    let (chol, delta) = chol;
    let l = chol.l();

    // whitened GLS: A = L^{-1} F, b = L^{-1} Y
    let a = l
        .solve_lower_triangular(f_mat)
        .ok_or_else(|| Error::numerical("singular Cholesky factor"))?;
    let b = l
        .solve_lower_triangular(y)
        .ok_or_else(|| Error::numerical("singular Cholesky factor"))?;

    let ata = a.transpose() * &a;
    let fri_chol = nalgebra::Cholesky::new(ata).ok_or_else(|| {
        Error::degenerate("trend basis is rank-deficient on the training inputs")
    })?;
    let beta_hat = fri_chol.solve(&(a.transpose() * &b));

    let resid_w = &b - &a * &beta_hat;
    let sigma2_hat = (resid_w.dot(&resid_w) / n0 as f64).max(1e-300);

    let lt = l.transpose();
    let rinv_resid = lt
        .solve_upper_triangular(&resid_w)
        .ok_or_else(|| Error::numerical("singular Cholesky factor"))?;
    let rinv_f = lt
        .solve_upper_triangular(&a)
        .ok_or_else(|| Error::numerical("singular Cholesky factor"))?;

    let log_det_r: f64 = (0..n0).map(|i| l[(i, i)].ln()).sum::<f64>() * 2.0;
    let n = n0 as f64;
    let neg_log_likelihood =
        0.5 * (n * (2.0 * std::f64::consts::PI).ln() + n * sigma2_hat.ln() + log_det_r + n);

    let _ = p;
    Ok(KrigingCore {
        beta_hat,
        sigma2_hat,
        nugget: delta,
        chol_l: l,
        f_mat: f_mat.clone(),
        rinv_resid,
        rinv_f,
        fri_chol_l: fri_chol.l(),
        neg_log_likelihood,
    })
}

impl KrigingCore {
    /// Predictive mean and variance given the cross-correlation vector
    /// `r(x)` and the trend basis `f(x)`. Variance is clipped at zero.
    pub fn predict(&self, r: &DVector<f64>, f: &DVector<f64>) -> (f64, f64) {
        let mean = f.dot(&self.beta_hat) + r.dot(&self.rinv_resid);

        let w = self
            .chol_l
            .solve_lower_triangular(r)
            .expect("factor is triangular with positive diagonal");
        let r_rinv_r = w.dot(&w);

        let u = self.rinv_f.transpose() * r - f;
        let t = self
            .fri_chol_l
            .solve_lower_triangular(&u)
            .expect("factor is triangular with positive diagonal");
        let var = self.sigma2_hat * (1.0 - r_rinv_r + t.dot(&t));
        (mean, var.max(0.0))
    }
}
