//! Derivative-free bounded minimization with the covariance-matrix
//! adaptation evolution strategy, shared by the classifier tuning loop and
//! the Kriging maximum-likelihood calibration.
//!
//! The implementation is the standard (mu/mu_w, lambda) scheme with
//! cumulative step-size adaptation and rank-one plus rank-mu covariance
//! updates, using the canonical tutorial constants. The search runs in
//! box-normalized coordinates; samples falling outside the box are folded
//! back by coordinate-wise reflection before evaluation and adaptation.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct OptimConfig {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Population size; defaults to `4 + floor(3 ln d)` when `None`.
    pub population: Option<usize>,
    pub max_evals: usize,
    pub seed: u64,
    /// Stop when the best objective value over the last ten generations
    /// improves by less than this amount.
    pub tol_fun: f64,
    /// Initial step size as a fraction of the box width.
    pub sigma0: f64,
}

impl OptimConfig {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, max_evals: usize, seed: u64) -> Self {
        Self {
            lower,
            upper,
            population: None,
            max_evals,
            seed,
            tol_fun: 1e-12,
            sigma0: 0.3,
        }
    }

    pub fn dimension(&self) -> usize {
        self.lower.len()
    }

    pub fn population_size(&self) -> usize {
        self.population
            .unwrap_or_else(|| 4 + (3.0 * (self.dimension() as f64).ln()).floor() as usize)
    }

    fn validate(&self) -> Result<()> {
        let d = self.dimension();
        if d == 0 || self.upper.len() != d {
            return Err(Error::invalid("bounds must be non-empty and equal length"));
        }
        if self
            .lower
            .iter()
            .zip(&self.upper)
            .any(|(l, u)| !(l < u) || !l.is_finite() || !u.is_finite())
        {
            return Err(Error::invalid("bounds must satisfy lower < upper"));
        }
        if self.max_evals < self.population_size() {
            return Err(Error::invalid(format!(
                "evaluation budget {} is below the population size {}",
                self.max_evals,
                self.population_size()
            )));
        }
        Ok(())
    }
}

/// Outcome of a single minimization run.
#[derive(Debug, Clone)]
pub struct OptimResult {
    pub x_best: Vec<f64>,
    pub f_best: f64,
    pub evals: usize,
}

/// Fold a coordinate into [0, 1] by reflection (triangle wave of period 2).
fn reflect(z: f64) -> f64 {
    if (0.0..=1.0).contains(&z) {
        return z;
    }
    let r = z.rem_euclid(2.0);
    if r <= 1.0 {
        r
    } else {
        2.0 - r
    }
}

/// Minimize `objective` over the configured box. Non-finite objective
/// values are treated as +inf. Deterministic for a fixed seed.
pub fn minimize<F>(mut objective: F, cfg: &OptimConfig) -> Result<OptimResult>
where
    F: FnMut(&[f64]) -> f64,
{
    cfg.validate()?;
    let d = cfg.dimension();
    let lambda = cfg.population_size();
    let mu = lambda / 2;

    let widths: Vec<f64> = cfg
        .lower
        .iter()
        .zip(&cfg.upper)
        .map(|(l, u)| u - l)
        .collect();
    let to_x = |z: &DVector<f64>| -> Vec<f64> {
        (0..d).map(|j| cfg.lower[j] + z[j] * widths[j]).collect()
    };

    // recombination weights and strategy constants (tutorial settings)
    let raw: Vec<f64> = (0..mu)
        .map(|i| (mu as f64 + 0.5).ln() - ((i + 1) as f64).ln())
        .collect();
    let wsum: f64 = raw.iter().sum();
    let weights: Vec<f64> = raw.iter().map(|w| w / wsum).collect();
    let mu_eff = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();
    let n = d as f64;
    let c_sigma = (mu_eff + 2.0) / (n + mu_eff + 5.0);
    let d_sigma = 1.0 + 2.0 * (((mu_eff - 1.0) / (n + 1.0)).sqrt() - 1.0).max(0.0) + c_sigma;
    let c_c = (4.0 + mu_eff / n) / (n + 4.0 + 2.0 * mu_eff / n);
    let c_1 = 2.0 / ((n + 1.3).powi(2) + mu_eff);
    let c_mu = (2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((n + 2.0).powi(2) + mu_eff)).min(1.0 - c_1);
    let chi_n = n.sqrt() * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n));

    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
    let mut mean = DVector::from_fn(d, |_, _| 0.2 + 0.6 * rng.random::<f64>());
    let mut sigma = cfg.sigma0;
    let mut cov = DMatrix::<f64>::identity(d, d);
    let mut p_sigma = DVector::<f64>::zeros(d);
    let mut p_c = DVector::<f64>::zeros(d);

    let mut best_x = to_x(&mean);
    let mut best_f = f64::INFINITY;
    let mut evals = 0usize;
    let mut generation = 0usize;
    let mut recent_best: Vec<f64> = Vec::new();

    while evals + lambda <= cfg.max_evals {
        generation += 1;
        let eig = cov.clone().symmetric_eigen();
        let sqrt_vals = eig.eigenvalues.map(|v| v.max(1e-20).sqrt());
        let b = &eig.eigenvectors;
        let bd = b * DMatrix::from_diagonal(&sqrt_vals);
        let inv_sqrt_c =
            b * DMatrix::from_diagonal(&sqrt_vals.map(|v| 1.0 / v)) * b.transpose();

        // sample, repair into the box, evaluate
        let mut population: Vec<(f64, DVector<f64>)> = Vec::with_capacity(lambda);
        for _ in 0..lambda {
            let z = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
            let mut cand = &mean + sigma * (&bd * z);
            for v in cand.iter_mut() {
                *v = reflect(*v);
            }
            let x = to_x(&cand);
            let mut f = objective(&x);
            if !f.is_finite() {
                f = f64::INFINITY;
            }
            evals += 1;
            if f < best_f {
                best_f = f;
                best_x = x;
            }
            population.push((f, cand));
        }
        population.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));

        let old_mean = mean.clone();
        mean = DVector::zeros(d);
        for (w, (_, z)) in weights.iter().zip(&population) {
            mean += *w * z;
        }

        let mean_step = (&mean - &old_mean) / sigma;
        p_sigma = (1.0 - c_sigma) * &p_sigma
            + (c_sigma * (2.0 - c_sigma) * mu_eff).sqrt() * (&inv_sqrt_c * &mean_step);
        let expected = (1.0 - (1.0 - c_sigma).powi(2 * generation as i32)).sqrt() * chi_n;
        let h_sigma = if p_sigma.norm() / expected.max(1e-300) < 1.4 + 2.0 / (n + 1.0) {
            1.0
        } else {
            0.0
        };
        p_c = (1.0 - c_c) * &p_c
            + h_sigma * (c_c * (2.0 - c_c) * mu_eff).sqrt() * &mean_step;

        let mut rank_mu = DMatrix::<f64>::zeros(d, d);
        for (w, (_, z)) in weights.iter().zip(&population) {
            let y = (z - &old_mean) / sigma;
            rank_mu += *w * (&y * y.transpose());
        }
        cov = (1.0 - c_1 - c_mu) * &cov
            + c_1 * (&p_c * p_c.transpose() + (1.0 - h_sigma) * c_c * (2.0 - c_c) * &cov)
            + c_mu * rank_mu;
        // keep the matrix symmetric against drift
        cov = (&cov + cov.transpose()) * 0.5;

        sigma *= ((c_sigma / d_sigma) * (p_sigma.norm() / chi_n - 1.0)).exp();
        sigma = sigma.clamp(1e-12, 5.0);

        recent_best.push(population[0].0);
        if recent_best.len() > 10 {
            let oldest = recent_best[recent_best.len() - 11];
            let newest = *recent_best.last().unwrap();
            if (oldest - newest).abs() < cfg.tol_fun && oldest.is_finite() {
                break;
            }
        }
    }

    Ok(OptimResult {
        x_best: best_x,
        f_best: best_f,
        evals,
    })
}

/// Run `restarts` independent seeded minimizations and keep the best.
pub fn minimize_restarts<F>(
    mut objective: F,
    cfg: &OptimConfig,
    restarts: usize,
) -> Result<OptimResult>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut best: Option<OptimResult> = None;
    let mut total_evals = 0;
    for r in 0..restarts.max(1) {
        let mut sub = cfg.clone();
        sub.seed = cfg.seed.wrapping_add(0x9e37_79b9_7f4a_7c15u64.wrapping_mul(r as u64));
        let res = minimize(&mut objective, &sub)?;
        total_evals += res.evals;
        let better = best.as_ref().is_none_or(|b| res.f_best < b.f_best);
        if better {
            best = Some(res);
        }
    }
    let mut out = best.expect("at least one restart");
    out.evals = total_evals;
    Ok(out)
}
