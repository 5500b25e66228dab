//! Probabilistic input models specified as (family, mean, coefficient of
//! variation) triples, the convention used by the benchmark problems.
//!
//! The mean/C.o.V. pairs are converted to native parameters by exact moment
//! matching: Gaussian takes `sigma = cov * mean`; Lognormal takes
//! `sigma_ln^2 = ln(1 + cov^2)`, `mu_ln = ln(mean) - sigma_ln^2 / 2`; Gumbel
//! takes `beta = sigma * sqrt(6) / pi` and `location = mean - gamma_e * beta`.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Euler–Mascheroni constant (mean of the standard Gumbel law).
const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DistFamily {
    Gaussian,
    Lognormal,
    Gumbel,
}

/// One independent input component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginalDistribution {
    pub family: DistFamily,
    pub mean: f64,
    pub cov: f64,
}

impl MarginalDistribution {
    pub fn new(family: DistFamily, mean: f64, cov: f64) -> Result<Self> {
        if !(cov > 0.0 && cov.is_finite()) {
            return Err(Error::invalid(format!(
                "coefficient of variation must be positive, got {cov}"
            )));
        }
        if !mean.is_finite() {
            return Err(Error::invalid("mean must be finite"));
        }
        if family == DistFamily::Lognormal && mean <= 0.0 {
            return Err(Error::invalid("lognormal mean must be positive"));
        }
        // the std is cov * mean for all three families, so a non-positive
        // mean leaves no valid scale
        if mean <= 0.0 {
            return Err(Error::invalid(format!(
                "mean/C.o.V. parameterization needs mean > 0, got {mean}"
            )));
        }
        Ok(Self { family, mean, cov })
    }

    pub fn std(&self) -> f64 {
        self.cov * self.mean
    }

    /// Quantile function, defined on the open interval (0, 1).
    pub fn inverse_cdf(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::invalid(format!(
                "quantile argument must lie in (0, 1), got {u}"
            )));
        }
        let std_normal = Normal::standard();
        Ok(match self.family {
            DistFamily::Gaussian => self.mean + self.std() * std_normal.inverse_cdf(u),
            DistFamily::Lognormal => {
                let sigma2 = (1.0 + self.cov * self.cov).ln();
                let mu = self.mean.ln() - sigma2 / 2.0;
                (mu + sigma2.sqrt() * std_normal.inverse_cdf(u)).exp()
            }
            DistFamily::Gumbel => {
                let beta = self.std() * 6.0_f64.sqrt() / std::f64::consts::PI;
                let location = self.mean - EULER_GAMMA * beta;
                location - beta * (-u.ln()).ln()
            }
        })
    }
}

/// Independent joint input model: one marginal per input dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputModel {
    marginals: Vec<MarginalDistribution>,
}

impl InputModel {
    pub fn new(marginals: Vec<MarginalDistribution>) -> Result<Self> {
        if marginals.is_empty() {
            return Err(Error::invalid("input model needs at least one marginal"));
        }
        Ok(Self { marginals })
    }

    pub fn dimension(&self) -> usize {
        self.marginals.len()
    }

    pub fn marginals(&self) -> &[MarginalDistribution] {
        &self.marginals
    }

    /// Map a `[0,1)^M` design row through the marginal quantile functions.
    pub fn transform_row(&self, u: &[f64]) -> Result<Vec<f64>> {
        if u.len() != self.marginals.len() {
            return Err(Error::invalid(format!(
                "design row has {} columns, input model has {}",
                u.len(),
                self.marginals.len()
            )));
        }
        u.iter()
            .zip(&self.marginals)
            .map(|(&ui, m)| m.inverse_cdf(ui))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn gaussian_median_is_mean() {
        let d = MarginalDistribution::new(DistFamily::Gaussian, 10.0, 0.05).unwrap();
        assert_relative_eq!(d.inverse_cdf(0.5).unwrap(), 10.0, epsilon = 1e-12);
    }

    #[test]
    fn gumbel_moment_matching_parameters() {
        let d = MarginalDistribution::new(DistFamily::Gumbel, 430.0, 0.2).unwrap();
        let beta = d.std() * 6.0_f64.sqrt() / std::f64::consts::PI;
        let location = 430.0 - EULER_GAMMA * beta;
        assert_relative_eq!(beta, 67.05392490609614, epsilon = 1e-9);
        assert_relative_eq!(location, 391.2954241510703, epsilon = 1e-9);
        // the mode of the Gumbel law is its location parameter:
        // quantile at u = exp(-1) equals the location
        assert_relative_eq!(
            d.inverse_cdf((-1.0_f64).exp()).unwrap(),
            location,
            epsilon = 1e-9
        );
    }

    #[test]
    fn monte_carlo_means_match() {
        let mut rng = ChaCha12Rng::seed_from_u64(123);
        let n = 1_000_000;
        for (family, mean, cov) in [
            (DistFamily::Lognormal, 210.0, 0.10),
            (DistFamily::Gumbel, 430.0, 0.20),
            (DistFamily::Gaussian, 10.0, 0.05),
        ] {
            let d = MarginalDistribution::new(family, mean, cov).unwrap();
            let mut sum = 0.0;
            let mut sumsq = 0.0;
            for _ in 0..n {
                let u: f64 = rng.random::<f64>().clamp(1e-12, 1.0 - 1e-12);
                let x = d.inverse_cdf(u).unwrap();
                sum += x;
                sumsq += x * x;
            }
            let emp_mean = sum / n as f64;
            let emp_std = (sumsq / n as f64 - emp_mean * emp_mean).sqrt();
            assert_relative_eq!(emp_mean, mean, max_relative = 5e-3);
            assert_relative_eq!(emp_std, cov * mean, max_relative = 1e-2);
        }
    }

    #[test]
    fn strictly_increasing_in_u() {
        for family in [DistFamily::Gaussian, DistFamily::Lognormal, DistFamily::Gumbel] {
            let d = MarginalDistribution::new(family, 5.0, 0.3).unwrap();
            let mut prev = f64::NEG_INFINITY;
            for k in 1..200 {
                let u = k as f64 / 200.0;
                let q = d.inverse_cdf(u).unwrap();
                assert!(q > prev, "{family:?} not increasing at u={u}");
                prev = q;
            }
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        let d = MarginalDistribution::new(DistFamily::Gaussian, 1.0, 0.1).unwrap();
        assert!(d.inverse_cdf(0.0).is_err());
        assert!(d.inverse_cdf(1.0).is_err());
        assert!(MarginalDistribution::new(DistFamily::Lognormal, -1.0, 0.1).is_err());
        assert!(MarginalDistribution::new(DistFamily::Gaussian, 1.0, 0.0).is_err());
    }
}
