//! Independent oracles shared by the integration suites. Each one computes
//! its quantity through a different route than the implementation it
//! checks: dense solves instead of factor reuse, projected gradients
//! instead of working-set updates, null spaces instead of fixed points.

use nalgebra::{DMatrix, DVector};

use ccgp::gp::{ContinuousKernel, TrendSpec};

/// Dense conditional-Gaussian prediction with explicit inverses.
pub fn dense_gp_predict(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    trend: TrendSpec,
    kernel: ContinuousKernel,
    theta: &[f64],
    nugget: f64,
    xstar: &[f64],
) -> (f64, f64) {
    let n = x.nrows();
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| x.row(i).iter().copied().collect())
        .collect();
    let mut r = DMatrix::identity(n, n);
    for i in 0..n {
        r[(i, i)] += nugget;
        for j in (i + 1)..n {
            let v = kernel.correlation(&rows[i], &rows[j], theta);
            r[(i, j)] = v;
            r[(j, i)] = v;
        }
    }
    let f = DMatrix::from_rows(
        &(0..n)
            .map(|i| trend.basis(&rows[i]).transpose())
            .collect::<Vec<_>>(),
    );
    let r_inv = r.try_inverse().unwrap();
    let ftrif = f.transpose() * &r_inv * &f;
    let ftrif_inv = ftrif.try_inverse().unwrap();
    let beta = &ftrif_inv * f.transpose() * &r_inv * y;
    let resid = y - &f * &beta;
    let sigma2 = (resid.transpose() * &r_inv * &resid)[(0, 0)] / n as f64;

    let rv = DVector::from_fn(n, |i, _| kernel.correlation(&rows[i], xstar, theta));
    let fv = trend.basis(xstar);
    let mean = fv.dot(&beta) + (rv.transpose() * &r_inv * &resid)[(0, 0)];
    let u = f.transpose() * &r_inv * &rv - &fv;
    let var = sigma2
        * (1.0 - (rv.transpose() * &r_inv * &rv)[(0, 0)]
            + (u.transpose() * &ftrif_inv * &u)[(0, 0)]);
    (mean, var.max(0.0))
}

/// Dual objective `1/2 a'Qa - 1'a` of the soft-margin classifier.
pub fn svc_dual_objective(gram: &DMatrix<f64>, y: &[f64], alpha: &[f64]) -> f64 {
    let n = y.len();
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            quad += alpha[i] * alpha[j] * y[i] * y[j] * gram[(i, j)];
        }
    }
    0.5 * quad - alpha.iter().sum::<f64>()
}

/// Projection onto `{0 <= a <= C, a'y = 0}` by bisection on the multiplier
/// of the equality constraint.
fn project_dual(v: &[f64], y: &[f64], c: f64) -> Vec<f64> {
    let clip = |lam: f64| -> Vec<f64> {
        v.iter()
            .zip(y)
            .map(|(vi, yi)| (vi - lam * yi).clamp(0.0, c))
            .collect()
    };
    let balance = |a: &[f64]| -> f64 { a.iter().zip(y).map(|(ai, yi)| ai * yi).sum() };
    let bound = v.iter().fold(0.0f64, |m, x| m.max(x.abs())) + c + 1.0;
    let (mut lo, mut hi) = (-bound, bound);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if balance(&clip(mid)) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    clip(0.5 * (lo + hi))
}

/// Independent dense solver of the classifier dual: projected gradient
/// descent with a conservative step.
pub fn projected_gradient_qp(
    gram: &DMatrix<f64>,
    y: &[f64],
    c: f64,
    iters: usize,
) -> Vec<f64> {
    let n = y.len();
    let lipschitz: f64 = (0..n).map(|i| gram[(i, i)]).sum::<f64>().max(1.0);
    let step = 1.0 / lipschitz;
    let mut alpha = project_dual(&vec![0.0; n], y, c);
    for _ in 0..iters {
        let mut grad = vec![-1.0; n];
        for i in 0..n {
            for j in 0..n {
                grad[i] += y[i] * y[j] * gram[(i, j)] * alpha[j];
            }
        }
        let moved: Vec<f64> = alpha.iter().zip(&grad).map(|(a, g)| a - step * g).collect();
        alpha = project_dual(&moved, y, c);
    }
    alpha
}

/// Stationary distribution of the coupling transition matrix through an
/// SVD null-space solve of `(T - I) p = 0` with the normalization appended.
pub fn stationary_by_nullspace(pairwise: &DMatrix<f64>) -> Vec<f64> {
    let k = pairwise.nrows();
    let t = ccgp::svc::transition_matrix(pairwise);
    let mut a = DMatrix::zeros(k + 1, k);
    for i in 0..k {
        for j in 0..k {
            a[(i, j)] = t[(i, j)] - if i == j { 1.0 } else { 0.0 };
        }
    }
    for j in 0..k {
        a[(k, j)] = 1.0;
    }
    let mut rhs = DVector::zeros(k + 1);
    rhs[k] = 1.0;
    let svd = a.svd(true, true);
    let sol = svd.solve(&rhs, 1e-14).unwrap();
    sol.iter().copied().collect()
}
