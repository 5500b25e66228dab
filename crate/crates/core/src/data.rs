//! Training-data containers and column standardization.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A finite set of evaluated samples: an `N x M` input matrix paired with
/// the `N` scalar responses of the model under study, both in model units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentalDesign {
    inputs: DMatrix<f64>,
    outputs: DVector<f64>,
}

impl ExperimentalDesign {
    pub fn new(inputs: DMatrix<f64>, outputs: DVector<f64>) -> Result<Self> {
        if inputs.nrows() == 0 || inputs.ncols() == 0 {
            return Err(Error::invalid("experimental design must be non-empty"));
        }
        if inputs.nrows() != outputs.len() {
            return Err(Error::invalid(format!(
                "input rows ({}) do not match output length ({})",
                inputs.nrows(),
                outputs.len()
            )));
        }
        if inputs.iter().any(|v| !v.is_finite()) || outputs.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("experimental design contains non-finite entries"));
        }
        Ok(Self { inputs, outputs })
    }

    pub fn n_samples(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn n_inputs(&self) -> usize {
        self.inputs.ncols()
    }

    pub fn inputs(&self) -> &DMatrix<f64> {
        &self.inputs
    }

    pub fn outputs(&self) -> &DVector<f64> {
        &self.outputs
    }

    /// The joint `N x (M+1)` matrix `[X | Y]` clustered in stage one.
    pub fn joint(&self) -> DMatrix<f64> {
        let n = self.n_samples();
        let m = self.n_inputs();
        let mut joint = DMatrix::zeros(n, m + 1);
        joint.view_mut((0, 0), (n, m)).copy_from(&self.inputs);
        joint.set_column(m, &self.outputs);
        joint
    }
}

/// Per-column affine map taking the `M` input columns and the output column
/// to zero mean and unit standard deviation. Joint clustering needs the two
/// blocks on commensurate scales, so the output column is always included.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    means: DVector<f64>,
    stds: DVector<f64>,
}

impl Standardizer {
    /// Empirical means and unbiased standard deviations (divisor `N-1`) of
    /// the `M+1` joint columns. Constant columns are rejected by name.
    pub fn fit(ed: &ExperimentalDesign) -> Result<Self> {
        if ed.n_samples() < 2 {
            return Err(Error::degenerate(
                "standardizer needs at least two samples",
            ));
        }
        let joint = ed.joint();
        let n = joint.nrows() as f64;
        let mut means = DVector::zeros(joint.ncols());
        let mut stds = DVector::zeros(joint.ncols());
        for j in 0..joint.ncols() {
            let col = joint.column(j);
            let mean = col.sum() / n;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
            let std = var.sqrt();
            if std <= 0.0 || !std.is_finite() {
                let name = if j < joint.ncols() - 1 {
                    format!("input column {j}")
                } else {
                    "output column".to_string()
                };
                return Err(Error::degenerate(format!("{name} is constant")));
            }
            means[j] = mean;
            stds[j] = std;
        }
        Ok(Self { means, stds })
    }

    /// An identity standardizer, used when standardization is disabled.
    pub fn identity(m: usize) -> Self {
        Self {
            means: DVector::zeros(m + 1),
            stds: DVector::from_element(m + 1, 1.0),
        }
    }

    pub fn n_inputs(&self) -> usize {
        self.means.len() - 1
    }

    pub fn means(&self) -> &DVector<f64> {
        &self.means
    }

    pub fn stds(&self) -> &DVector<f64> {
        &self.stds
    }

    /// Standardize the full `[X | Y]` joint matrix.
    pub fn joint_to_standard(&self, joint: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = joint.clone();
        for j in 0..out.ncols() {
            let (m, s) = (self.means[j], self.stds[j]);
            for v in out.column_mut(j).iter_mut() {
                *v = (*v - m) / s;
            }
        }
        out
    }

    /// Standardize an input matrix (`M` columns).
    pub fn inputs_to_standard(&self, inputs: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = inputs.clone();
        for j in 0..out.ncols() {
            let (m, s) = (self.means[j], self.stds[j]);
            for v in out.column_mut(j).iter_mut() {
                *v = (*v - m) / s;
            }
        }
        out
    }

    /// Standardize a single input point.
    pub fn input_to_standard(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_iterator(
            x.len(),
            x.iter()
                .enumerate()
                .map(|(j, v)| (v - self.means[j]) / self.stds[j]),
        )
    }

    pub fn output_to_standard(&self, y: f64) -> f64 {
        let j = self.means.len() - 1;
        (y - self.means[j]) / self.stds[j]
    }

    /// Map a standardized predictive mean back to model units.
    pub fn output_from_standard(&self, y_std: f64) -> f64 {
        let j = self.means.len() - 1;
        y_std * self.stds[j] + self.means[j]
    }

    /// Predictive variances scale with the square of the output std.
    pub fn variance_from_standard(&self, var_std: f64) -> f64 {
        let j = self.means.len() - 1;
        var_std * self.stds[j] * self.stds[j]
    }
}
