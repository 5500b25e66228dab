//! Dirichlet process Gaussian mixture over joint standardized input–output
//! points, fitted by truncated mean-field variational inference.
//!
//! The stick proportions get Beta variational factors, the component
//! mean/precision pairs get Normal–inverse-Wishart factors conjugate to the
//! Gaussian likelihood, and the assignments get independent multinomials.
//! Coordinate ascent cycles assignments, sticks and atoms; every sweep can
//! only raise the evidence lower bound, which is monitored as the
//! convergence criterion. After convergence, components that hold almost no
//! mass or too few hard-assigned points are pruned and the survivors are
//! relabelled by decreasing weight.

mod cavi;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use cavi::elbo;

/// Normal–inverse-Wishart parameter set of one variational atom.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NiwParams {
    pub mean: DVector<f64>,
    pub scale: f64,
    pub dof: f64,
    pub scatter: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DpmmConfig {
    /// Concentration of the Dirichlet process.
    pub alpha: f64,
    /// Truncation level of the stick-breaking representation.
    pub truncation: usize,
    pub base_mean: DVector<f64>,
    pub base_scale: f64,
    pub base_dof: f64,
    pub base_scatter: DMatrix<f64>,
    pub max_iters: usize,
    /// Relative improvement below which a sweep counts as converged.
    pub elbo_tol: f64,
    pub restarts: usize,
    pub prune_weight: f64,
    pub prune_min_points: usize,
}

impl DpmmConfig {
    /// Weakly informative defaults for standardized data of the given
    /// dimension: unit base scatter, near-flat mean prior, dof `d + 2`.
    pub fn defaults(dim: usize) -> Self {
        Self {
            alpha: 1.0,
            truncation: 20,
            base_mean: DVector::zeros(dim),
            base_scale: 0.01,
            base_dof: dim as f64 + 2.0,
            base_scatter: DMatrix::identity(dim, dim),
            max_iters: 500,
            elbo_tol: 1e-6,
            restarts: 5,
            prune_weight: 0.01,
            prune_min_points: 3,
        }
    }

    fn validate(&self, dim: usize) -> Result<()> {
        if self.truncation < 2 {
            return Err(Error::invalid("truncation must be at least 2"));
        }
        if !(self.alpha > 0.0) {
            return Err(Error::invalid("concentration must be positive"));
        }
        if self.base_mean.len() != dim
            || self.base_scatter.nrows() != dim
            || self.base_scatter.ncols() != dim
        {
            return Err(Error::invalid(format!(
                "base distribution parameters must have dimension {dim}"
            )));
        }
        if !(self.base_dof > dim as f64 - 1.0) {
            return Err(Error::invalid(format!(
                "base degrees of freedom must exceed {}",
                dim as f64 - 1.0
            )));
        }
        if !(self.base_scale > 0.0) {
            return Err(Error::invalid("base scale must be positive"));
        }
        if nalgebra::Cholesky::new(self.base_scatter.clone()).is_none() {
            return Err(Error::invalid("base scatter must be positive definite"));
        }
        if !(self.prune_weight > 0.0 && self.prune_weight < 1.0) {
            return Err(Error::invalid("prune weight must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// All variational factors together with the bound trace of the fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariationalState {
    /// Beta parameters of the stick factors, `(T-1) x 2`.
    pub gamma: Vec<[f64; 2]>,
    /// Atom factors, length `T`.
    pub tau: Vec<NiwParams>,
    /// Responsibilities, `N x T`; rows sum to 1.
    pub phi: DMatrix<f64>,
    pub elbo_trace: Vec<f64>,
}

/// Pruned and relabelled clustering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringResult {
    pub n_clusters: usize,
    /// Hard labels in `1..=n_clusters`, by decreasing cluster weight.
    pub labels: Vec<usize>,
    /// `N x K`, renormalized over the surviving clusters.
    pub responsibilities: DMatrix<f64>,
    /// Expected mixing proportions of the survivors; sums to at most 1,
    /// the remainder being residual stick mass.
    pub weights: Vec<f64>,
    /// `K x D` posterior means.
    pub cluster_means: DMatrix<f64>,
    /// Posterior expected covariance per cluster.
    pub cluster_covs: Vec<DMatrix<f64>>,
    /// False when the sweep limit was reached before the bound settled.
    pub converged: bool,
}

/// Mixing proportions of the stick-breaking construction.
pub fn stick_breaking_weights(v: &[f64]) -> Result<Vec<f64>> {
    if v.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::invalid("stick proportions must lie in [0, 1]"));
    }
    let mut weights = Vec::with_capacity(v.len() + 1);
    let mut remaining = 1.0;
    for &vt in v {
        weights.push(vt * remaining);
        remaining *= 1.0 - vt;
    }
    weights.push(remaining);
    Ok(weights)
}

/// Run the coordinate ascent from several seeded initializations and keep
/// the state with the best final bound, then prune and relabel.
pub fn fit(
    data: &DMatrix<f64>,
    cfg: &DpmmConfig,
    seed: u64,
) -> Result<(VariationalState, ClusteringResult)> {
    let (n, dim) = (data.nrows(), data.ncols());
    if n < 2 {
        return Err(Error::invalid("need at least two points to cluster"));
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("data contains non-finite entries"));
    }
    cfg.validate(dim)?;

    let mut best: Option<(VariationalState, bool)> = None;
    for r in 0..cfg.restarts.max(1) {
        let restart_seed = seed.wrapping_add((r as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
        let phi0 = initial_responsibilities(data, cfg.truncation, restart_seed);
        let (state, converged) = cavi::run(data, cfg, phi0)?;
        let take = match &best {
            None => true,
            Some((b, _)) => {
                state.elbo_trace.last().unwrap() > b.elbo_trace.last().unwrap()
            }
        };
        if take {
            best = Some((state, converged));
        }
    }
    let (state, converged) = best.expect("at least one restart ran");
    let result = prune_and_relabel(data, cfg, &state, converged);
    Ok((state, result))
}

/// Seeding: k-means++ centers give one-hot assignments which are blended
/// 0.9/0.1 with the uniform distribution over components.
fn initial_responsibilities(data: &DMatrix<f64>, t: usize, seed: u64) -> DMatrix<f64> {
    let n = data.nrows();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut centers: Vec<usize> = vec![rng.random_range(0..n)];
    let mut d2: Vec<f64> = (0..n)
        .map(|i| (data.row(i) - data.row(centers[0])).norm_squared())
        .collect();
    while centers.len() < t.min(n) {
        let total: f64 = d2.iter().sum();
        let next = if total <= 0.0 {
            rng.random_range(0..n)
        } else {
            let mut u = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                u -= w;
                if u <= 0.0 {
                    pick = i;
                    break;
                }
            }
            pick
        };
        centers.push(next);
        for i in 0..n {
            d2[i] = d2[i].min((data.row(i) - data.row(next)).norm_squared());
        }
    }

    let uniform = 1.0 / t as f64;
    let mut phi = DMatrix::from_element(n, t, 0.1 * uniform);
    for i in 0..n {
        let mut nearest = 0;
        let mut best = f64::INFINITY;
        for (k, &c) in centers.iter().enumerate() {
            let d = (data.row(i) - data.row(c)).norm_squared();
            if d < best {
                best = d;
                nearest = k;
            }
        }
        phi[(i, nearest)] += 0.9;
    }
    phi
}

fn prune_and_relabel(
    data: &DMatrix<f64>,
    cfg: &DpmmConfig,
    state: &VariationalState,
    converged: bool,
) -> ClusteringResult {
    let n = data.nrows();
    let dim = data.ncols();
    let t = cfg.truncation;

    let weights = expected_weights(state);
    let mut hard_counts = vec![0usize; t];
    for i in 0..n {
        let mut arg = 0;
        for k in 1..t {
            if state.phi[(i, k)] > state.phi[(i, arg)] {
                arg = k;
            }
        }
        hard_counts[arg] += 1;
    }

    let mut survivors: Vec<usize> = (0..t)
        .filter(|&k| weights[k] >= cfg.prune_weight && hard_counts[k] >= cfg.prune_min_points)
        .collect();
    if survivors.is_empty() {
        let top = (0..t)
            .max_by(|&a, &b| weights[a].partial_cmp(&weights[b]).unwrap())
            .unwrap();
        survivors.push(top);
    }
    survivors.sort_by(|&a, &b| weights[b].partial_cmp(&weights[a]).unwrap());

    let k_out = survivors.len();
    let mut responsibilities = DMatrix::zeros(n, k_out);
    for i in 0..n {
        let mut row_sum = 0.0;
        for (kk, &comp) in survivors.iter().enumerate() {
            let v = state.phi[(i, comp)];
            responsibilities[(i, kk)] = v;
            row_sum += v;
        }
        if row_sum <= 0.0 {
            for kk in 0..k_out {
                responsibilities[(i, kk)] = 1.0 / k_out as f64;
            }
        } else {
            for kk in 0..k_out {
                responsibilities[(i, kk)] /= row_sum;
            }
        }
    }

    let labels: Vec<usize> = (0..n)
        .map(|i| {
            let mut arg = 0;
            for kk in 1..k_out {
                if responsibilities[(i, kk)] > responsibilities[(i, arg)] {
                    arg = kk;
                }
            }
            arg + 1
        })
        .collect();

    let cluster_means = DMatrix::from_fn(k_out, dim, |kk, j| state.tau[survivors[kk]].mean[j]);
    let cluster_covs: Vec<DMatrix<f64>> = survivors
        .iter()
        .map(|&comp| {
            let niw = &state.tau[comp];
            // mean of the inverse-Wishart posterior over the covariance
            let denom = (niw.dof - dim as f64 - 1.0).max(1e-3);
            &niw.scatter / denom
        })
        .collect();

    ClusteringResult {
        n_clusters: k_out,
        labels,
        responsibilities,
        weights: survivors.iter().map(|&k| weights[k]).collect(),
        cluster_means,
        cluster_covs,
        converged,
    }
}

/// Expected mixing proportions under the variational Beta factors.
fn expected_weights(state: &VariationalState) -> Vec<f64> {
    let t = state.tau.len();
    let mut weights = vec![0.0; t];
    let mut remaining = 1.0;
    for k in 0..t {
        if k < t - 1 {
            let [a, b] = state.gamma[k];
            let ev = a / (a + b);
            weights[k] = ev * remaining;
            remaining *= 1.0 - ev;
        } else {
            weights[k] = remaining;
        }
    }
    weights
}

/// Posterior membership probabilities of a new (standardized) point under
/// the pruned Gaussian summary of the clustering.
pub fn predict_responsibility(result: &ClusteringResult, w: &[f64]) -> Result<Vec<f64>> {
    let dim = result.cluster_means.ncols();
    if w.len() != dim {
        return Err(Error::invalid(format!(
            "point has {} coordinates, clustering lives in dimension {dim}",
            w.len()
        )));
    }
    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("point must be finite"));
    }
    let k = result.n_clusters;
    let mut log_terms = Vec::with_capacity(k);
    for kk in 0..k {
        let cov = &result.cluster_covs[kk];
        let chol = nalgebra::Cholesky::new(cov.clone()).ok_or_else(|| {
            Error::numerical(format!("cluster {} has a singular covariance", kk + 1))
        })?;
        let diff = DVector::from_fn(dim, |j, _| w[j] - result.cluster_means[(kk, j)]);
        let z = chol.l().solve_lower_triangular(&diff).unwrap();
        let log_det: f64 = (0..dim).map(|j| chol.l()[(j, j)].ln()).sum::<f64>() * 2.0;
        let log_density = -0.5
            * (dim as f64 * (2.0 * std::f64::consts::PI).ln() + log_det + z.norm_squared());
        log_terms.push(result.weights[kk].max(1e-300).ln() + log_density);
    }
    let max = log_terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut probs: Vec<f64> = log_terms.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = probs.iter().sum();
    for p in &mut probs {
        *p /= total;
    }
    Ok(probs)
}
