//! Kriging regression with a polynomial trend, anisotropic correlation
//! kernels, maximum-likelihood hyperparameters and Gaussian predictive
//! mean/variance, plus a mixed continuous–categorical variant whose inputs
//! carry a class label as an extra coordinate.

mod core;
mod kernel;

pub use self::core::KrigingCore;
pub use kernel::{categorical_correlation, gaussian_correlation, matern52, ContinuousKernel};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optim::{self, OptimConfig};

/// Polynomial trend of the Kriging mean: constant (ordinary Kriging) or
/// linear in the inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrendSpec {
    Constant,
    Linear,
}

impl TrendSpec {
    pub fn basis_size(self, m: usize) -> usize {
        match self {
            TrendSpec::Constant => 1,
            TrendSpec::Linear => m + 1,
        }
    }

    pub fn basis(self, x: &[f64]) -> DVector<f64> {
        match self {
            TrendSpec::Constant => DVector::from_element(1, 1.0),
            TrendSpec::Linear => {
                let mut f = DVector::zeros(x.len() + 1);
                f[0] = 1.0;
                for (j, &v) in x.iter().enumerate() {
                    f[j + 1] = v;
                }
                f
            }
        }
    }

    fn vandermonde(self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let rows: Vec<_> = (0..x.nrows())
            .map(|i| {
                let row: Vec<f64> = x.row(i).iter().copied().collect();
                self.basis(&row).transpose()
            })
            .collect();
        DMatrix::from_rows(&rows)
    }
}

/// How the diagonal inflation of the correlation matrix is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum NuggetSpec {
    /// Fixed value (default 1e-8); escalating jitter still applies on
    /// factorization failure.
    Fixed(f64),
    /// Estimated by maximum likelihood inside log10 bounds.
    Estimated { log10_lower: f64, log10_upper: f64 },
}

impl Default for NuggetSpec {
    fn default() -> Self {
        NuggetSpec::Fixed(1e-8)
    }
}

/// Calibration settings shared by the plain and categorical fits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpConfig {
    pub trend: TrendSpec,
    pub kernel: ContinuousKernel,
    pub nugget: NuggetSpec,
    /// log10 bounds for every continuous lengthscale (standardized inputs).
    pub log10_theta_bounds: (f64, f64),
    /// log10 bounds for the categorical lengthscale.
    pub log10_theta_cat_bounds: (f64, f64),
    /// Evaluation budget per optimizer restart.
    pub max_evals: usize,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for GpConfig {
    fn default() -> Self {
        Self {
            trend: TrendSpec::Constant,
            kernel: ContinuousKernel::Matern52,
            nugget: NuggetSpec::default(),
            log10_theta_bounds: (-2.0, 2.0),
            log10_theta_cat_bounds: (-3.0, 1.0),
            max_evals: 60,
            restarts: 3,
            seed: 0,
        }
    }
}

impl GpConfig {
    /// The categorical variant defaults to the Gaussian continuous kernel,
    /// matching the combined product-correlation form.
    pub fn categorical_default() -> Self {
        Self {
            kernel: ContinuousKernel::Gaussian,
            ..Self::default()
        }
    }
}

/// A fitted Kriging model over continuous inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpModel {
    trend: TrendSpec,
    kernel: ContinuousKernel,
    lengthscales: DVector<f64>,
    training_inputs: DMatrix<f64>,
    training_outputs: DVector<f64>,
    core: KrigingCore,
}

/// Average outputs of exactly duplicated input rows.
fn dedupe(x: &DMatrix<f64>, y: &DVector<f64>) -> (DMatrix<f64>, DVector<f64>) {
    let n = x.nrows();
    let mut keep: Vec<usize> = Vec::with_capacity(n);
    let mut sums: Vec<(f64, usize)> = Vec::with_capacity(n);
    'outer: for i in 0..n {
        for (slot, &k) in keep.iter().enumerate() {
            if x.row(i) == x.row(k) {
                sums[slot].0 += y[i];
                sums[slot].1 += 1;
                continue 'outer;
            }
        }
        keep.push(i);
        sums.push((y[i], 1));
    }
    if keep.len() == n {
        return (x.clone(), y.clone());
    }
    let xd = DMatrix::from_fn(keep.len(), x.ncols(), |i, j| x[(keep[i], j)]);
    let yd = DVector::from_iterator(keep.len(), sums.iter().map(|(s, c)| s / *c as f64));
    (xd, yd)
}

fn correlation_matrix(
    x: &DMatrix<f64>,
    kernel: ContinuousKernel,
    theta: &[f64],
) -> DMatrix<f64> {
    let n = x.nrows();
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| x.row(i).iter().copied().collect())
        .collect();
    let mut r = DMatrix::identity(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = kernel.correlation(&rows[i], &rows[j], theta);
            r[(i, j)] = v;
            r[(j, i)] = v;
        }
    }
    r
}

/// Full profile negative log marginal likelihood (with constants) at the
/// given hyperparameters, with trend coefficients and process variance
/// concentrated out in closed form.
pub fn negative_log_likelihood(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    trend: TrendSpec,
    kernel: ContinuousKernel,
    theta: &[f64],
    nugget: f64,
) -> Result<f64> {
    if theta.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
        return Err(Error::invalid("lengthscales must be positive and finite"));
    }
    if theta.len() != x.ncols() {
        return Err(Error::invalid(format!(
            "theta has {} components for {} input columns",
            theta.len(),
            x.ncols()
        )));
    }
    let r = correlation_matrix(x, kernel, theta);
    let f = trend.vandermonde(x);
    Ok(core::assemble(&r, &f, y, nugget)?.neg_log_likelihood)
}

impl GpModel {
    /// Calibrate lengthscales (and optionally the nugget) by maximum
    /// likelihood, then assemble the factorized predictor.
    pub fn fit(x: &DMatrix<f64>, y: &DVector<f64>, cfg: &GpConfig) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::invalid("input rows do not match output length"));
        }
        let (x, y) = dedupe(x, y);
        let (n0, m) = (x.nrows(), x.ncols());
        let p = cfg.trend.basis_size(m);
        if n0 <= p {
            return Err(Error::degenerate(format!(
                "{n0} distinct points cannot identify a trend with {p} coefficients"
            )));
        }

        let f = cfg.trend.vandermonde(&x);
        let (tl, tu) = cfg.log10_theta_bounds;
        let mut lower = vec![tl; m];
        let mut upper = vec![tu; m];
        if let NuggetSpec::Estimated {
            log10_lower,
            log10_upper,
        } = cfg.nugget
        {
            lower.push(log10_lower);
            upper.push(log10_upper);
        }

        let objective = |z: &[f64]| -> f64 {
            let theta: Vec<f64> = z[..m].iter().map(|v| 10f64.powf(*v)).collect();
            let nugget = match cfg.nugget {
                NuggetSpec::Fixed(v) => v,
                NuggetSpec::Estimated { .. } => 10f64.powf(z[m]),
            };
            let r = correlation_matrix(&x, cfg.kernel, &theta);
            match core::assemble(&r, &f, &y, nugget) {
                Ok(c) => c.neg_log_likelihood,
                Err(_) => f64::INFINITY,
            }
        };
        let opt_cfg = OptimConfig::new(lower, upper, cfg.max_evals, cfg.seed);
        let best = optim::minimize_restarts(objective, &opt_cfg, cfg.restarts)?;

        let theta: Vec<f64> = best.x_best[..m].iter().map(|v| 10f64.powf(*v)).collect();
        let nugget = match cfg.nugget {
            NuggetSpec::Fixed(v) => v,
            NuggetSpec::Estimated { .. } => 10f64.powf(best.x_best[m]),
        };
        let r = correlation_matrix(&x, cfg.kernel, &theta);
        let core = core::assemble(&r, &f, &y, nugget)?;
        Ok(Self {
            trend: cfg.trend,
            kernel: cfg.kernel,
            lengthscales: DVector::from_vec(theta),
            training_inputs: x,
            training_outputs: y,
            core,
        })
    }

    /// Assemble the model at given hyperparameters, skipping calibration.
    pub fn with_hyperparameters(
        x: &DMatrix<f64>,
        y: &DVector<f64>,
        trend: TrendSpec,
        kernel: ContinuousKernel,
        theta: &[f64],
        nugget: f64,
    ) -> Result<Self> {
        if theta.len() != x.ncols() || theta.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return Err(Error::invalid("lengthscales must be positive, one per column"));
        }
        let (x, y) = dedupe(x, y);
        let r = correlation_matrix(&x, kernel, theta);
        let f = trend.vandermonde(&x);
        let core = core::assemble(&r, &f, &y, nugget)?;
        Ok(Self {
            trend,
            kernel,
            lengthscales: DVector::from_row_slice(theta),
            training_inputs: x,
            training_outputs: y,
            core,
        })
    }

    /// Predictive mean and variance of the Gaussian law at `x`.
    pub fn predict(&self, x: &[f64]) -> Result<(f64, f64)> {
        if x.len() != self.training_inputs.ncols() {
            return Err(Error::invalid(format!(
                "point has {} coordinates, model expects {}",
                x.len(),
                self.training_inputs.ncols()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("prediction point must be finite"));
        }
        let theta: Vec<f64> = self.lengthscales.iter().copied().collect();
        let r = DVector::from_fn(self.training_inputs.nrows(), |i, _| {
            let row: Vec<f64> = self.training_inputs.row(i).iter().copied().collect();
            self.kernel.correlation(&row, x, &theta)
        });
        let f = self.trend.basis(x);
        Ok(self.core.predict(&r, &f))
    }

    pub fn lengthscales(&self) -> &DVector<f64> {
        &self.lengthscales
    }

    pub fn trend(&self) -> TrendSpec {
        self.trend
    }

    pub fn kernel(&self) -> ContinuousKernel {
        self.kernel
    }

    pub fn beta_hat(&self) -> &DVector<f64> {
        &self.core.beta_hat
    }

    pub fn sigma2_hat(&self) -> f64 {
        self.core.sigma2_hat
    }

    pub fn nugget(&self) -> f64 {
        self.core.nugget
    }

    pub fn n_training(&self) -> usize {
        self.training_inputs.nrows()
    }

    pub fn core(&self) -> &KrigingCore {
        &self.core
    }

    pub fn training_inputs(&self) -> &DMatrix<f64> {
        &self.training_inputs
    }

    pub fn training_outputs(&self) -> &DVector<f64> {
        &self.training_outputs
    }
}

/// Kriging over label-augmented points `(x, l)`: the correlation is the
/// product of the continuous kernel and the compound-symmetry class
/// correlation, and the class lengthscale is calibrated jointly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoricalGpModel {
    trend: TrendSpec,
    kernel: ContinuousKernel,
    lengthscales: DVector<f64>,
    theta_cat: f64,
    training_inputs: DMatrix<f64>,
    training_labels: Vec<usize>,
    training_outputs: DVector<f64>,
    core: KrigingCore,
}

fn categorical_matrix(
    x: &DMatrix<f64>,
    labels: &[usize],
    kernel: ContinuousKernel,
    theta: &[f64],
    theta_cat: f64,
) -> DMatrix<f64> {
    let n = x.nrows();
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| x.row(i).iter().copied().collect())
        .collect();
    let mut r = DMatrix::identity(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = kernel.correlation(&rows[i], &rows[j], theta)
                * categorical_correlation(labels[i], labels[j], theta_cat);
            r[(i, j)] = v;
            r[(j, i)] = v;
        }
    }
    r
}

impl CategoricalGpModel {
    /// Wrap an already-fitted plain model as a single-class categorical one.
    pub fn from_plain(base: GpModel, labels: Vec<usize>) -> Result<Self> {
        if labels.len() != base.training_inputs.nrows() {
            return Err(Error::invalid("label count does not match training size"));
        }
        if labels.windows(2).any(|w| w[0] != w[1]) {
            return Err(Error::invalid("plain wrapping requires a single class"));
        }
        Ok(Self {
            trend: base.trend,
            kernel: base.kernel,
            lengthscales: base.lengthscales,
            theta_cat: 1.0,
            training_inputs: base.training_inputs,
            training_labels: labels,
            training_outputs: base.training_outputs,
            core: base.core,
        })
    }

    pub fn fit(
        x: &DMatrix<f64>,
        labels: &[usize],
        y: &DVector<f64>,
        cfg: &GpConfig,
    ) -> Result<Self> {
        if x.nrows() != y.len() || x.nrows() != labels.len() {
            return Err(Error::invalid(
                "inputs, labels and outputs must have equal lengths",
            ));
        }
        let (n0, m) = (x.nrows(), x.ncols());
        let p = cfg.trend.basis_size(m);
        if n0 <= p {
            return Err(Error::degenerate(format!(
                "{n0} points cannot identify a trend with {p} coefficients"
            )));
        }

        // a single class carries no categorical structure: delegate to the
        // plain fit so the reduction is exact
        if labels.windows(2).all(|w| w[0] == w[1]) {
            let base = GpModel::fit(x, y, cfg)?;
            return Ok(Self {
                trend: base.trend,
                kernel: base.kernel,
                lengthscales: base.lengthscales,
                theta_cat: 1.0,
                training_inputs: base.training_inputs,
                training_labels: labels.to_vec(),
                training_outputs: base.training_outputs,
                core: base.core,
            });
        }

        let f = cfg.trend.vandermonde(x);
        let (tl, tu) = cfg.log10_theta_bounds;
        let (cl, cu) = cfg.log10_theta_cat_bounds;
        let mut lower = vec![tl; m];
        let mut upper = vec![tu; m];
        lower.push(cl);
        upper.push(cu);

        let objective = |z: &[f64]| -> f64 {
            let theta: Vec<f64> = z[..m].iter().map(|v| 10f64.powf(*v)).collect();
            let theta_cat = 10f64.powf(z[m]);
            let nugget = match cfg.nugget {
                NuggetSpec::Fixed(v) => v,
                NuggetSpec::Estimated { .. } => 1e-8,
            };
            let r = categorical_matrix(x, labels, cfg.kernel, &theta, theta_cat);
            match core::assemble(&r, &f, y, nugget) {
                Ok(c) => c.neg_log_likelihood,
                Err(_) => f64::INFINITY,
            }
        };
        let opt_cfg = OptimConfig::new(lower, upper, cfg.max_evals, cfg.seed);
        let best = optim::minimize_restarts(objective, &opt_cfg, cfg.restarts)?;

        let theta: Vec<f64> = best.x_best[..m].iter().map(|v| 10f64.powf(*v)).collect();
        let theta_cat = 10f64.powf(best.x_best[m]);
        let nugget = match cfg.nugget {
            NuggetSpec::Fixed(v) => v,
            NuggetSpec::Estimated { .. } => 1e-8,
        };
        let r = categorical_matrix(x, labels, cfg.kernel, &theta, theta_cat);
        let core = core::assemble(&r, &f, y, nugget)?;
        Ok(Self {
            trend: cfg.trend,
            kernel: cfg.kernel,
            lengthscales: DVector::from_vec(theta),
            theta_cat,
            training_inputs: x.clone(),
            training_labels: labels.to_vec(),
            training_outputs: y.clone(),
            core,
        })
    }

    /// Prediction at the augmented point `(x, label)`.
    pub fn predict(&self, x: &[f64], label: usize) -> Result<(f64, f64)> {
        if x.len() != self.training_inputs.ncols() {
            return Err(Error::invalid(format!(
                "point has {} coordinates, model expects {}",
                x.len(),
                self.training_inputs.ncols()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("prediction point must be finite"));
        }
        if !self.training_labels.contains(&label) {
            return Err(Error::invalid(format!(
                "label {label} never appeared in the training set"
            )));
        }
        let theta: Vec<f64> = self.lengthscales.iter().copied().collect();
        let r = DVector::from_fn(self.training_inputs.nrows(), |i, _| {
            let row: Vec<f64> = self.training_inputs.row(i).iter().copied().collect();
            self.kernel.correlation(&row, x, &theta)
                * categorical_correlation(self.training_labels[i], label, self.theta_cat)
        });
        let f = self.trend.basis(x);
        Ok(self.core.predict(&r, &f))
    }

    pub fn theta_cat(&self) -> f64 {
        self.theta_cat
    }

    pub fn lengthscales(&self) -> &DVector<f64> {
        &self.lengthscales
    }
}
