//! Probabilistic multi-class support vector classification: one binary
//! soft-margin classifier per class pair, each tuned by leave-one-out
//! search and calibrated with a sigmoid, recombined by voting for the label
//! and by pairwise coupling for the class posterior.

mod coupling;
mod kernel;
mod platt;
mod smo;
mod tune;

pub use coupling::{coupled_posteriors, fixed_point_residual, transition_matrix, CoupledPosteriors};
pub use kernel::{gaussian_kernel, KernelConvention, KernelParams};
pub use platt::{fit_platt, fit_platt_with, PlattCalibration};

pub use smo::{decision, solve_smo, train_binary, BinarySvcModel, SmoSolution};
pub use tune::{loo_decisions, loo_error_count, tune_hyperparameters, TuneConfig};

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One tuned and calibrated binary classifier of the one-vs-one ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairClassifier {
    pub positive: usize,
    pub negative: usize,
    pub model: BinarySvcModel,
    pub platt: PlattCalibration,
}

/// The full one-vs-one ensemble over classes `1..=n_classes`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MulticlassSvc {
    pub n_classes: usize,
    pub pairs: Vec<PairClassifier>,
    pub coupling_max_iters: usize,
    pub coupling_tol: f64,
}

#[derive(Debug, Clone)]
pub struct SvcTrainConfig {
    pub tune: TuneConfig,
    pub coupling_tol: f64,
    pub coupling_max_iters: usize,
    /// Where the sigmoid calibration reads its decision values from.
    pub platt_decisions: PlattDecisions,
}

impl Default for SvcTrainConfig {
    fn default() -> Self {
        Self {
            tune: TuneConfig::default(),
            coupling_tol: 1e-10,
            coupling_max_iters: 1000,
            platt_decisions: PlattDecisions::KFold(5),
        }
    }
}

/// Decision values used to calibrate the pairwise sigmoids.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlattDecisions {
    /// Decisions of the final model on its own training points.
    InSample,
    /// Leave-one-out decisions from the tuning machinery.
    LeaveOneOut,
    /// Cross-validated decisions from k interleaved folds.
    KFold(usize),
}

/// Cross-validated decision values: each interleaved fold is scored by the
/// model trained on the remaining folds. Folds that lose a class entirely
/// fall back to unit-margin misses.
fn kfold_decisions(
    x: &DMatrix<f64>,
    y: &[f64],
    c: f64,
    params: &KernelParams,
    folds: usize,
) -> Result<Vec<f64>> {
    let n = y.len();
    let folds = folds.clamp(2, n);
    let mut decisions = vec![0.0; n];
    for fold in 0..folds {
        let train: Vec<usize> = (0..n).filter(|i| i % folds != fold).collect();
        let test: Vec<usize> = (0..n).filter(|i| i % folds == fold).collect();
        let ty: Vec<f64> = train.iter().map(|&i| y[i]).collect();
        if ty.iter().all(|&l| l == ty[0]) {
            for &i in &test {
                decisions[i] = -y[i];
            }
            continue;
        }
        let tx = DMatrix::from_fn(train.len(), x.ncols(), |a, b| x[(train[a], b)]);
        let model = train_binary(&tx, &ty, c, params, (1, 2))?;
        for &i in &test {
            let row: Vec<f64> = x.row(i).iter().copied().collect();
            decisions[i] = decision(&model, &row);
        }
    }
    Ok(decisions)
}

/// Train the `K(K-1)/2` pair classifiers on `(x, labels)` with labels in
/// `1..=K`. Pair trainings are independent and run in parallel; each pair
/// derives its own optimizer seed, so the result does not depend on the
/// thread schedule.
pub fn train_multiclass(
    x: &DMatrix<f64>,
    labels: &[usize],
    cfg: &SvcTrainConfig,
) -> Result<MulticlassSvc> {
    if x.nrows() != labels.len() {
        return Err(Error::invalid("input rows do not match label count"));
    }
    let k = *labels
        .iter()
        .max()
        .ok_or_else(|| Error::invalid("empty label vector"))?;
    if k < 2 {
        return Err(Error::invalid("multi-class training needs at least two classes"));
    }
    for class in 1..=k {
        if !labels.contains(&class) {
            return Err(Error::degenerate(format!(
                "class {class} has no training points"
            )));
        }
    }

    let pairs_ids: Vec<(usize, usize)> = (1..=k)
        .flat_map(|i| ((i + 1)..=k).map(move |j| (i, j)))
        .collect();

    let pairs: Result<Vec<PairClassifier>> = pairs_ids
        .par_iter()
        .enumerate()
        .map(|(idx, &(i, j))| {
            let rows: Vec<usize> = (0..labels.len())
                .filter(|&t| labels[t] == i || labels[t] == j)
                .collect();
            let xs = DMatrix::from_fn(rows.len(), x.ncols(), |a, b| x[(rows[a], b)]);
            let ys: Vec<f64> = rows
                .iter()
                .map(|&t| if labels[t] == i { 1.0 } else { -1.0 })
                .collect();
            let mut tune_cfg = cfg.tune.clone();
            tune_cfg.seed = cfg
                .tune
                .seed
                .wrapping_add((idx as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15));
            let (c, params) = tune_hyperparameters(&xs, &ys, &tune_cfg)?;
            let model = train_binary(&xs, &ys, c, &params, (i, j))?;
            let (decisions, out_of_sample): (Vec<f64>, bool) = match cfg.platt_decisions {
                PlattDecisions::InSample => (
                    (0..xs.nrows())
                        .map(|t| {
                            let row: Vec<f64> = xs.row(t).iter().copied().collect();
                            decision(&model, &row)
                        })
                        .collect(),
                    false,
                ),
                PlattDecisions::LeaveOneOut => (loo_decisions(&xs, &ys, c, &params)?, true),
                PlattDecisions::KFold(folds) => {
                    (kfold_decisions(&xs, &ys, c, &params, folds)?, true)
                }
            };
            // out-of-sample decisions carry honest wrong-side values, so the
            // plain maximum-likelihood fit is finite and calibrated; the
            // regularized targets remain the fallback wherever the decisions
            // are separable and plain likelihood would diverge
            let separable = {
                let worst_pos = decisions
                    .iter()
                    .zip(&ys)
                    .filter(|&(_, l)| *l > 0.0)
                    .map(|(d, _)| *d)
                    .fold(f64::INFINITY, f64::min);
                let best_neg = decisions
                    .iter()
                    .zip(&ys)
                    .filter(|&(_, l)| *l < 0.0)
                    .map(|(d, _)| *d)
                    .fold(f64::NEG_INFINITY, f64::max);
                worst_pos > best_neg
            };
            let platt = fit_platt_with(&decisions, &ys, !out_of_sample || separable)?;
            Ok(PairClassifier {
                positive: i,
                negative: j,
                model,
                platt,
            })
        })
        .collect();

    Ok(MulticlassSvc {
        n_classes: k,
        pairs: pairs?,
        coupling_max_iters: cfg.coupling_max_iters,
        coupling_tol: cfg.coupling_tol,
    })
}

impl MulticlassSvc {
    /// Pairwise positive-class probabilities at `x`, clamped away from 0
    /// and 1 so the coupled chain stays irreducible.
    fn pairwise_matrix(&self, x: &[f64]) -> DMatrix<f64> {
        let k = self.n_classes;
        let mut m = DMatrix::zeros(k, k);
        for pair in &self.pairs {
            let p = pair
                .platt
                .probability(decision(&pair.model, x))
                .clamp(1e-7, 1.0 - 1e-7);
            m[(pair.positive - 1, pair.negative - 1)] = p;
            m[(pair.negative - 1, pair.positive - 1)] = 1.0 - p;
        }
        m
    }

    /// Coupled posterior class probabilities; sums to 1.
    pub fn predict_class_probs(&self, x: &[f64]) -> Result<CoupledPosteriors> {
        coupled_posteriors(
            &self.pairwise_matrix(x),
            self.coupling_tol,
            self.coupling_max_iters,
        )
    }

    /// Majority vote over the pair classifiers. A two-way tie is settled by
    /// the classifier trained on exactly those two classes; wider ties fall
    /// back to the highest coupled posterior.
    pub fn predict_label(&self, x: &[f64]) -> Result<usize> {
        let mut votes = vec![0usize; self.n_classes + 1];
        for pair in &self.pairs {
            let d = decision(&pair.model, x);
            let winner = if d > 0.0 { pair.positive } else { pair.negative };
            votes[winner] += 1;
        }
        let top = *votes.iter().skip(1).max().unwrap();
        let tied: Vec<usize> = (1..=self.n_classes)
            .filter(|&cl| votes[cl] == top)
            .collect();
        match tied.as_slice() {
            [single] => Ok(*single),
            [a, b] => {
                let pair = self
                    .pairs
                    .iter()
                    .find(|p| p.positive == *a && p.negative == *b)
                    .expect("every class pair has a classifier");
                Ok(if decision(&pair.model, x) > 0.0 {
                    pair.positive
                } else {
                    pair.negative
                })
            }
            _ => {
                let probs = self.predict_class_probs(x)?.probs;
                Ok(tied
                    .into_iter()
                    .max_by(|&a, &b| {
                        probs[a - 1]
                            .partial_cmp(&probs[b - 1])
                            .unwrap_or(std::cmp::Ordering::Equal)
                            .then(b.cmp(&a))
                    })
                    .unwrap())
            }
        }
    }
}
