//! Auto-correlation functions for the Kriging models.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Continuous-coordinate correlation family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ContinuousKernel {
    /// Anisotropic Matern-5/2, the default for the local models.
    Matern52,
    /// Anisotropic squared-exponential, used by the categorical variant.
    Gaussian,
}

impl ContinuousKernel {
    pub fn correlation(self, a: &[f64], b: &[f64], theta: &[f64]) -> f64 {
        match self {
            ContinuousKernel::Matern52 => matern52_unchecked(a, b, theta),
            ContinuousKernel::Gaussian => gaussian_unchecked(a, b, theta),
        }
    }
}

fn validate_theta(theta: &[f64]) -> Result<()> {
    if theta.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
        return Err(Error::invalid("lengthscales must be positive and finite"));
    }
    Ok(())
}

fn matern52_unchecked(a: &[f64], b: &[f64], theta: &[f64]) -> f64 {
    let sqrt5 = 5.0_f64.sqrt();
    let mut prod = 1.0;
    for l in 0..a.len() {
        let h = (a[l] - b[l]).abs() / theta[l];
        prod *= (1.0 + sqrt5 * h + (5.0 / 3.0) * h * h) * (-sqrt5 * h).exp();
    }
    prod
}

fn gaussian_unchecked(a: &[f64], b: &[f64], theta: &[f64]) -> f64 {
    let mut s = 0.0;
    for l in 0..a.len() {
        let h = (a[l] - b[l]) / theta[l];
        s += h * h;
    }
    (-0.5 * s).exp()
}

/// Product of one-dimensional Matern-5/2 correlations with per-dimension
/// lengthscales; equals 1 at zero distance.
pub fn matern52(a: &[f64], b: &[f64], theta: &[f64]) -> Result<f64> {
    validate_theta(theta)?;
    Ok(matern52_unchecked(a, b, theta))
}

/// Squared-exponential correlation `exp(-1/2 sum ((a_l-b_l)/theta_l)^2)`.
pub fn gaussian_correlation(a: &[f64], b: &[f64], theta: &[f64]) -> Result<f64> {
    validate_theta(theta)?;
    Ok(gaussian_unchecked(a, b, theta))
}

/// Compound-symmetry correlation between class labels realized through a
/// Gaussian embedding: 1 within a class, `exp(-1/(2 theta_cat^2))` across.
pub fn categorical_correlation(l1: usize, l2: usize, theta_cat: f64) -> f64 {
    if l1 == l2 {
        1.0
    } else {
        (-0.5 / (theta_cat * theta_cat)).exp()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn matern_is_one_at_zero_distance() {
        let a = [0.3, -1.2, 4.0];
        assert_relative_eq!(matern52(&a, &a, &[1.0, 2.0, 0.5]).unwrap(), 1.0);
    }

    #[test]
    fn matern_unit_distance_value() {
        let v = matern52(&[0.0], &[1.0], &[1.0]).unwrap();
        assert_relative_eq!(v, 0.5239941088318203, epsilon = 1e-12);
    }

    #[test]
    fn matern_strictly_decreasing_in_distance() {
        let mut prev = 1.0;
        for k in 1..100 {
            let d = k as f64 * 0.05;
            let v = matern52(&[0.0], &[d], &[1.0]).unwrap();
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn rejects_non_positive_lengthscale() {
        assert!(matern52(&[0.0], &[1.0], &[0.0]).is_err());
        assert!(gaussian_correlation(&[0.0], &[1.0], &[-1.0]).is_err());
    }

    #[test]
    fn categorical_values() {
        assert_relative_eq!(categorical_correlation(2, 2, 1.0), 1.0);
        assert_relative_eq!(
            categorical_correlation(1, 2, 1.0),
            0.6065306597126334,
            epsilon = 1e-12
        );
        // cross-class correlation approaches 1 as theta_cat grows
        assert!(categorical_correlation(1, 2, 1e6) > 1.0 - 1e-9);
    }
}
