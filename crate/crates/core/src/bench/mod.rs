//! The two analytical benchmark problems and an experiment runner that
//! repeats the full fit over fresh randomized designs, compares every
//! recombination mode against the direct single-model baseline and reports
//! validation errors as CSV rows plus a JSON summary.

mod manhattan;
mod truss;

pub use manhattan::{manhattan, ManhattanSpec};
pub use truss::{truss_critical_load, truss_displacement, truss_model, truss_snapped, TrussSpec};

use std::io::Write;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::ExperimentalDesign;
use crate::error::{Error, Result};
use crate::metrics::{mae, nmse};
use crate::pipeline::{self, PipelineConfig};
use crate::sobol;

/// Prediction scheme compared by the experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Direct,
    Hard,
    Soft,
    Categorical,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::Direct,
        Method::Hard,
        Method::Soft,
        Method::Categorical,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Direct => "direct",
            Method::Hard => "hard",
            Method::Soft => "soft",
            Method::Categorical => "categorical",
        }
    }
}

/// One benchmark problem: a black-box function with an input sampler.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum BenchProblem {
    Manhattan(ManhattanSpec),
    Truss(TrussSpec),
}

impl BenchProblem {
    pub fn name(&self) -> &'static str {
        match self {
            BenchProblem::Manhattan(_) => "manhattan",
            BenchProblem::Truss(_) => "truss",
        }
    }

    pub fn dimension(&self) -> usize {
        match self {
            BenchProblem::Manhattan(_) => 2,
            BenchProblem::Truss(_) => 3,
        }
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        match self {
            BenchProblem::Manhattan(spec) => manhattan(x, spec),
            BenchProblem::Truss(spec) => truss_model(x, spec),
        }
    }

    /// Map a `[0,1)^M` design row into the problem's input space.
    fn transform_row(&self, u: &[f64]) -> Result<Vec<f64>> {
        match self {
            BenchProblem::Manhattan(_) => Ok(u.iter().map(|v| 2.0 * v - 1.0).collect()),
            BenchProblem::Truss(spec) => {
                let clamped: Vec<f64> = u
                    .iter()
                    .map(|v| v.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0))
                    .collect();
                spec.input_model.transform_row(&clamped)
            }
        }
    }

    /// Training design: a digitally shifted quasi-random design pushed
    /// through the input transform.
    pub fn sample_design(&self, n: usize, seed: u64) -> Result<ExperimentalDesign> {
        let m = self.dimension();
        let design = sobol::sobol_design(n, m, seed)?;
        let mut inputs = DMatrix::zeros(n, m);
        let mut outputs = DVector::zeros(n);
        for i in 0..n {
            let u: Vec<f64> = (0..m).map(|j| design[(i, j)]).collect();
            let x = self.transform_row(&u)?;
            outputs[i] = self.evaluate(&x)?;
            for j in 0..m {
                inputs[(i, j)] = x[j];
            }
        }
        ExperimentalDesign::new(inputs, outputs)
    }

    /// Pseudo-random validation set, regenerable from its seed.
    pub fn validation_set(&self, n: usize, seed: u64) -> Result<(DMatrix<f64>, Vec<f64>)> {
        let m = self.dimension();
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut inputs = DMatrix::zeros(n, m);
        let mut outputs = vec![0.0; n];
        for i in 0..n {
            let u: Vec<f64> = (0..m)
                .map(|_| rng.random::<f64>().clamp(1e-15, 1.0 - 1e-15))
                .collect();
            let x = self.transform_row(&u)?;
            outputs[i] = self.evaluate(&x)?;
            for j in 0..m {
                inputs[(i, j)] = x[j];
            }
        }
        Ok((inputs, outputs))
    }
}

/// Settings of one experiment campaign.
#[derive(Debug, Clone)]
pub struct RunSettings {
    pub sizes: Vec<usize>,
    pub repetitions: usize,
    pub n_validation: usize,
    pub methods: Vec<Method>,
    pub pipeline: PipelineConfig,
    pub master_seed: u64,
}

impl RunSettings {
    /// Paper-style campaign: 20 repetitions against a 10^4-point
    /// validation set, all four methods.
    pub fn defaults_for(problem: &BenchProblem) -> Self {
        let sizes = match problem {
            BenchProblem::Manhattan(_) => vec![100, 200, 400],
            BenchProblem::Truss(_) => vec![50, 100, 200],
        };
        Self {
            sizes,
            repetitions: 20,
            n_validation: 10_000,
            methods: Method::ALL.to_vec(),
            pipeline: PipelineConfig::default(),
            master_seed: 20_240_101,
        }
    }
}

/// One (method, size, repetition) cell of the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub problem: String,
    pub method: String,
    pub n: usize,
    pub rep: usize,
    pub seed: u64,
    pub nmse: f64,
    pub mae: f64,
    pub k_clusters: usize,
    pub fit_seconds: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub master_seed: u64,
    pub rows: Vec<ReportRow>,
}

fn cell_seed(master: u64, size_index: usize, rep: usize) -> u64 {
    // non-zero so designs always carry a digital shift
    1 + master
        .wrapping_mul(0x9e37_79b9_7f4a_7c15)
        .wrapping_add((size_index as u64) << 32)
        .wrapping_add(rep as u64 + 1)
}

fn validation_seed(master: u64, rep: usize) -> u64 {
    master
        .wrapping_mul(0xd1b5_4a32_d192_ed03)
        .wrapping_add(rep as u64)
}

/// All per-repetition artifacts needed by the acceptance checks: the
/// fitted pipeline and per-method predictions on the shared validation set.
pub struct CellOutcome {
    pub n: usize,
    pub rep: usize,
    pub seed: u64,
    pub k_clusters: usize,
    pub rows: Vec<ReportRow>,
}

fn run_cell(
    problem: &BenchProblem,
    settings: &RunSettings,
    size_index: usize,
    rep: usize,
    validation: &(DMatrix<f64>, Vec<f64>),
) -> CellOutcome {
    let n = settings.sizes[size_index];
    let seed = cell_seed(settings.master_seed, size_index, rep);
    let (val_x, val_y) = validation;
    let n_val = val_y.len();

    let mut rows = Vec::new();
    let mut record = |method: Method, result: Result<(Vec<f64>, f64)>, k: usize| {
        let row = match result {
            Ok((pred, fit_seconds)) => {
                let nmse_v = nmse(val_y, &pred).unwrap_or(f64::NAN);
                let mae_v = mae(val_y, &pred).unwrap_or(f64::NAN);
                ReportRow {
                    problem: problem.name().to_string(),
                    method: method.name().to_string(),
                    n,
                    rep,
                    seed,
                    nmse: nmse_v,
                    mae: mae_v,
                    k_clusters: k,
                    fit_seconds,
                    error: None,
                }
            }
            Err(e) => ReportRow {
                problem: problem.name().to_string(),
                method: method.name().to_string(),
                n,
                rep,
                seed,
                nmse: f64::NAN,
                mae: f64::NAN,
                k_clusters: k,
                fit_seconds: 0.0,
                error: Some(e.to_string()),
            },
        };
        rows.push(row);
    };

    let design = match problem.sample_design(n, seed) {
        Ok(d) => d,
        Err(e) => {
            for &m in &settings.methods {
                record(m, Err(Error::invalid(e.to_string())), 0);
            }
            return CellOutcome {
                n,
                rep,
                seed,
                k_clusters: 0,
                rows,
            };
        }
    };

    let mut k_clusters = 0;
    let needs_pipeline = settings
        .methods
        .iter()
        .any(|m| !matches!(m, Method::Direct));
    let fitted = if needs_pipeline {
        let start = Instant::now();
        match pipeline::fit_pipeline(&design, &settings.pipeline, seed) {
            Ok(fp) => {
                k_clusters = fp.n_clusters();
                Some((fp, start.elapsed().as_secs_f64()))
            }
            Err(e) => {
                for &m in &settings.methods {
                    if !matches!(m, Method::Direct) {
                        record(m, Err(Error::invalid(e.to_string())), 0);
                    }
                }
                None
            }
        }
    } else {
        None
    };

    // one classifier pass serves all three recombination modes
    let pipeline_methods: Vec<Method> = settings
        .methods
        .iter()
        .copied()
        .filter(|m| !matches!(m, Method::Direct))
        .collect();
    let mut batched: Option<(Vec<f64>, Vec<f64>, Vec<f64>)> = None;
    if let Some((fp, _)) = &fitted {
        if pipeline_methods.len() > 1 && fp.mode() == crate::pipeline::Recombination::All {
            let mut hard = Vec::with_capacity(n_val);
            let mut soft = Vec::with_capacity(n_val);
            let mut cat = Vec::with_capacity(n_val);
            let all: Result<()> = (|| {
                for i in 0..n_val {
                    let x: Vec<f64> = val_x.row(i).iter().copied().collect();
                    let (h, s, c) = fp.predict_all(&x)?;
                    hard.push(h.mean);
                    soft.push(s.mean);
                    cat.push(c.mean);
                }
                Ok(())
            })();
            if all.is_ok() {
                batched = Some((hard, soft, cat));
            }
        }
    }

    for &method in &settings.methods {
        match method {
            Method::Direct => {
                let start = Instant::now();
                let result = pipeline::fit_direct_baseline(
                    &design,
                    &settings.pipeline.gp,
                    settings.pipeline.standardize,
                )
                .and_then(|direct| {
                    let fit_seconds = start.elapsed().as_secs_f64();
                    let mut pred = Vec::with_capacity(n_val);
                    for i in 0..n_val {
                        let x: Vec<f64> = val_x.row(i).iter().copied().collect();
                        pred.push(direct.predict(&x)?.0);
                    }
                    Ok((pred, fit_seconds))
                });
                record(method, result, k_clusters);
            }
            Method::Hard | Method::Soft | Method::Categorical => {
                if let Some((fp, fit_seconds)) = &fitted {
                    let result = if let Some((hard, soft, cat)) = &batched {
                        let pred = match method {
                            Method::Hard => hard.clone(),
                            Method::Soft => soft.clone(),
                            Method::Categorical => cat.clone(),
                            Method::Direct => unreachable!(),
                        };
                        Ok((pred, *fit_seconds))
                    } else {
                        (|| {
                            let mut pred = Vec::with_capacity(n_val);
                            for i in 0..n_val {
                                let x: Vec<f64> = val_x.row(i).iter().copied().collect();
                                let p = match method {
                                    Method::Hard => fp.predict_hard(&x)?,
                                    Method::Soft => fp.predict_soft(&x)?,
                                    Method::Categorical => fp.predict_categorical(&x)?,
                                    Method::Direct => unreachable!(),
                                };
                                pred.push(p.mean);
                            }
                            Ok((pred, *fit_seconds))
                        })()
                    };
                    record(method, result, k_clusters);
                }
            }
        }
    }

    CellOutcome {
        n,
        rep,
        seed,
        k_clusters,
        rows,
    }
}

/// Run the full campaign. Cells are independent and evaluated in parallel;
/// every random stream is derived from the master seed, so the report is
/// identical regardless of the thread schedule.
pub fn run_experiment(problem: &BenchProblem, settings: &RunSettings) -> Result<ExperimentReport> {
    if settings.sizes.is_empty() || settings.repetitions == 0 || settings.methods.is_empty() {
        return Err(Error::invalid("experiment needs sizes, repetitions and methods"));
    }
    // one validation set per repetition, shared across sizes and methods
    let validations: Result<Vec<_>> = (0..settings.repetitions)
        .map(|rep| {
            problem.validation_set(
                settings.n_validation,
                validation_seed(settings.master_seed, rep),
            )
        })
        .collect();
    let validations = validations?;

    let cells: Vec<(usize, usize)> = (0..settings.sizes.len())
        .flat_map(|s| (0..settings.repetitions).map(move |r| (s, r)))
        .collect();
    let outcomes: Vec<CellOutcome> = cells
        .par_iter()
        .map(|&(s, r)| run_cell(problem, settings, s, r, &validations[r]))
        .collect();

    let rows = outcomes.into_iter().flat_map(|c| c.rows).collect();
    Ok(ExperimentReport {
        master_seed: settings.master_seed,
        rows,
    })
}

/// Linear-interpolation quantile of a sorted copy of `values`.
fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let pos = q * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        v[lo]
    } else {
        v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
    }
}

/// Aggregate of one (method, size) group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryCell {
    pub problem: String,
    pub method: String,
    pub n: usize,
    pub runs: usize,
    pub failures: usize,
    pub nmse_median: f64,
    pub nmse_q25: f64,
    pub nmse_q75: f64,
    pub mae_median: f64,
    pub mae_q25: f64,
    pub mae_q75: f64,
    pub k_clusters_median: f64,
}

impl ExperimentReport {
    /// Medians and quartiles per (problem, method, size), in a stable order.
    pub fn summarize(&self) -> Vec<SummaryCell> {
        let mut keys: Vec<(String, String, usize)> = self
            .rows
            .iter()
            .map(|r| (r.problem.clone(), r.method.clone(), r.n))
            .collect();
        keys.sort();
        keys.dedup();
        keys.iter()
            .map(|(problem, method, n)| {
                let group: Vec<&ReportRow> = self
                    .rows
                    .iter()
                    .filter(|r| &r.problem == problem && &r.method == method && r.n == *n)
                    .collect();
                let nmses: Vec<f64> = group
                    .iter()
                    .filter(|r| r.error.is_none())
                    .map(|r| r.nmse)
                    .collect();
                let maes: Vec<f64> = group
                    .iter()
                    .filter(|r| r.error.is_none())
                    .map(|r| r.mae)
                    .collect();
                let ks: Vec<f64> = group
                    .iter()
                    .filter(|r| r.error.is_none())
                    .map(|r| r.k_clusters as f64)
                    .collect();
                SummaryCell {
                    problem: problem.clone(),
                    method: method.clone(),
                    n: *n,
                    runs: group.len(),
                    failures: group.iter().filter(|r| r.error.is_some()).count(),
                    nmse_median: quantile(&nmses, 0.5),
                    nmse_q25: quantile(&nmses, 0.25),
                    nmse_q75: quantile(&nmses, 0.75),
                    mae_median: quantile(&maes, 0.5),
                    mae_q25: quantile(&maes, 0.25),
                    mae_q75: quantile(&maes, 0.75),
                    k_clusters_median: quantile(&ks, 0.5),
                }
            })
            .collect()
    }

    /// Median of a metric for one (method, size) group.
    pub fn median_nmse(&self, method: Method, n: usize) -> f64 {
        let values: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| r.method == method.name() && r.n == n && r.error.is_none())
            .map(|r| r.nmse)
            .collect();
        quantile(&values, 0.5)
    }

    pub fn median_mae(&self, method: Method, n: usize) -> f64 {
        let values: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| r.method == method.name() && r.n == n && r.error.is_none())
            .map(|r| r.mae)
            .collect();
        quantile(&values, 0.5)
    }

    /// Cluster counts of one design size across repetitions (one per cell).
    pub fn cluster_counts(&self, n: usize) -> Vec<usize> {
        let mut counts: Vec<(usize, usize)> = self
            .rows
            .iter()
            .filter(|r| r.n == n && r.error.is_none() && r.method != Method::Direct.name())
            .map(|r| (r.rep, r.k_clusters))
            .collect();
        counts.sort();
        counts.dedup();
        counts.into_iter().map(|(_, k)| k).collect()
    }

    /// Write the per-run rows as a CSV table with a header.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# master_seed={}", self.master_seed)?;
        writeln!(
            w,
            "problem,method,n,rep,seed,nmse,mae,k_clusters,fit_seconds,error"
        )?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{:.3},{}",
                r.problem,
                r.method,
                r.n,
                r.rep,
                r.seed,
                r.nmse,
                r.mae,
                r.k_clusters,
                r.fit_seconds,
                r.error.as_deref().unwrap_or("")
            )?;
        }
        Ok(())
    }

    /// Write the aggregate summary as JSON.
    pub fn write_json_summary<W: Write>(&self, mut w: W) -> Result<()> {
        #[derive(Serialize)]
        struct Summary<'a> {
            master_seed: u64,
            cells: &'a [SummaryCell],
        }
        let cells = self.summarize();
        let text = serde_json::to_string_pretty(&Summary {
            master_seed: self.master_seed,
            cells: &cells,
        })
        .map_err(|e| Error::numerical(format!("summary serialization failed: {e}")))?;
        w.write_all(text.as_bytes())
            .map_err(|e| Error::numerical(format!("summary write failed: {e}")))?;
        Ok(())
    }
}
