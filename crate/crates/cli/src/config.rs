//! Schema-validated TOML configuration. Unknown keys are rejected so typos
//! fail before any computation starts.

use anyhow::{bail, Context, Result};
use serde::Deserialize;

use ccgp::bench::{BenchProblem, ManhattanSpec, Method, RunSettings, TrussSpec};
use ccgp::dist::{DistFamily, InputModel, MarginalDistribution};
use ccgp::gp::{ContinuousKernel, GpConfig, NuggetSpec, TrendSpec};
use ccgp::pipeline::{DpmmSettings, PipelineConfig, Recombination};
use ccgp::svc::{KernelConvention, PlattDecisions, SvcTrainConfig, TuneConfig};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "lowercase")]
pub enum RecombinationKey {
    Hard,
    Soft,
    Categorical,
    All,
}

impl From<RecombinationKey> for Recombination {
    fn from(k: RecombinationKey) -> Self {
        match k {
            RecombinationKey::Hard => Recombination::Hard,
            RecombinationKey::Soft => Recombination::Soft,
            RecombinationKey::Categorical => Recombination::Categorical,
            RecombinationKey::All => Recombination::All,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DpmmSection {
    pub alpha: f64,
    pub truncation: usize,
    pub max_iters: usize,
    pub elbo_tol: f64,
    pub restarts: usize,
    pub prune_weight: f64,
    pub prune_min_points: usize,
}

impl Default for DpmmSection {
    fn default() -> Self {
        let d = DpmmSettings::default();
        Self {
            alpha: d.alpha,
            truncation: d.truncation,
            max_iters: d.max_iters,
            elbo_tol: d.elbo_tol,
            restarts: d.restarts,
            prune_weight: d.prune_weight,
            prune_min_points: d.prune_min_points,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SvcSection {
    pub budget: usize,
    pub log10_c_bounds: (f64, f64),
    pub log10_theta_bounds: (f64, f64),
    pub anisotropic: bool,
    /// "squared" keeps the squared-lengthscale exponent; "plain" divides by
    /// the lengthscale itself.
    pub kernel_convention: String,
    /// "kfold", "insample" or "leave-one-out".
    pub platt_decisions: String,
    pub platt_folds: usize,
    pub coupling_tol: f64,
    pub coupling_max_iters: usize,
}

impl Default for SvcSection {
    fn default() -> Self {
        let t = TuneConfig::default();
        Self {
            budget: t.budget,
            log10_c_bounds: t.log10_c_bounds,
            log10_theta_bounds: t.log10_theta_bounds,
            anisotropic: t.anisotropic,
            kernel_convention: "squared".to_string(),
            platt_decisions: "kfold".to_string(),
            platt_folds: 5,
            coupling_tol: 1e-10,
            coupling_max_iters: 1000,
        }
    }
}

impl SvcSection {
    fn to_config(&self) -> Result<SvcTrainConfig> {
        let convention = match self.kernel_convention.as_str() {
            "squared" => KernelConvention::SquaredLengthscale,
            "plain" => KernelConvention::Plain,
            other => bail!("svc.kernel_convention '{other}' is not 'squared' or 'plain'"),
        };
        let platt_decisions = match self.platt_decisions.as_str() {
            "kfold" => PlattDecisions::KFold(self.platt_folds),
            "insample" => PlattDecisions::InSample,
            "leave-one-out" => PlattDecisions::LeaveOneOut,
            other => bail!(
                "svc.platt_decisions '{other}' is not 'kfold', 'insample' or 'leave-one-out'"
            ),
        };
        Ok(SvcTrainConfig {
            tune: TuneConfig {
                log10_c_bounds: self.log10_c_bounds,
                log10_theta_bounds: self.log10_theta_bounds,
                anisotropic: self.anisotropic,
                budget: self.budget,
                seed: 0,
                convention,
            },
            coupling_tol: self.coupling_tol,
            coupling_max_iters: self.coupling_max_iters,
            platt_decisions,
        })
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GpSection {
    /// "constant" or "linear".
    pub trend: String,
    /// "matern52" or "gaussian".
    pub kernel: String,
    pub nugget: f64,
    pub estimate_nugget: bool,
    pub log10_nugget_bounds: (f64, f64),
    pub log10_theta_bounds: (f64, f64),
    pub log10_theta_cat_bounds: (f64, f64),
    pub max_evals: usize,
    pub restarts: usize,
}

impl GpSection {
    fn defaults_from(cfg: &GpConfig) -> Self {
        Self {
            trend: "constant".to_string(),
            kernel: match cfg.kernel {
                ContinuousKernel::Matern52 => "matern52".to_string(),
                ContinuousKernel::Gaussian => "gaussian".to_string(),
            },
            nugget: 1e-8,
            estimate_nugget: false,
            log10_nugget_bounds: (-10.0, -2.0),
            log10_theta_bounds: cfg.log10_theta_bounds,
            log10_theta_cat_bounds: cfg.log10_theta_cat_bounds,
            max_evals: cfg.max_evals,
            restarts: cfg.restarts,
        }
    }
}

impl Default for GpSection {
    fn default() -> Self {
        Self::defaults_from(&GpConfig::default())
    }
}

impl GpSection {
    fn to_config(&self) -> Result<GpConfig> {
        let trend = match self.trend.as_str() {
            "constant" => TrendSpec::Constant,
            "linear" => TrendSpec::Linear,
            other => bail!("gp.trend '{other}' is not 'constant' or 'linear'"),
        };
        let kernel = match self.kernel.as_str() {
            "matern52" => ContinuousKernel::Matern52,
            "gaussian" => ContinuousKernel::Gaussian,
            other => bail!("gp.kernel '{other}' is not 'matern52' or 'gaussian'"),
        };
        let nugget = if self.estimate_nugget {
            NuggetSpec::Estimated {
                log10_lower: self.log10_nugget_bounds.0,
                log10_upper: self.log10_nugget_bounds.1,
            }
        } else {
            NuggetSpec::Fixed(self.nugget)
        };
        Ok(GpConfig {
            trend,
            kernel,
            nugget,
            log10_theta_bounds: self.log10_theta_bounds,
            log10_theta_cat_bounds: self.log10_theta_cat_bounds,
            max_evals: self.max_evals,
            restarts: self.restarts,
            seed: 0,
        })
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineSection {
    pub recombination: Option<RecombinationKey>,
    pub standardize: Option<bool>,
    pub dpmm: DpmmSection,
    pub svc: SvcSection,
    pub gp: GpSection,
    pub gp_categorical: Option<GpSection>,
}

impl PipelineSection {
    pub fn to_config(&self) -> Result<PipelineConfig> {
        let base = PipelineConfig::default();
        let gp_categorical = match &self.gp_categorical {
            Some(section) => section.to_config()?,
            None => GpConfig::categorical_default(),
        };
        Ok(PipelineConfig {
            dpmm: DpmmSettings {
                alpha: self.dpmm.alpha,
                truncation: self.dpmm.truncation,
                max_iters: self.dpmm.max_iters,
                elbo_tol: self.dpmm.elbo_tol,
                restarts: self.dpmm.restarts,
                prune_weight: self.dpmm.prune_weight,
                prune_min_points: self.dpmm.prune_min_points,
            },
            svc: self.svc.to_config()?,
            gp: self.gp.to_config()?,
            gp_categorical,
            recombination: self
                .recombination
                .clone()
                .map(Into::into)
                .unwrap_or(base.recombination),
            standardize: self.standardize.unwrap_or(base.standardize),
        })
    }
}

/// Configuration of `ccgp fit`.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitConfig {
    pub seed: Option<u64>,
    pub pipeline: PipelineSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdRule {
    /// "nmse" or "mae".
    pub metric: String,
    pub n: usize,
    pub method: String,
    pub baseline: String,
    pub max_median_ratio: f64,
}

/// Configuration of `ccgp bench`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    /// "manhattan" or "truss".
    pub problem: String,
    #[serde(default)]
    pub sizes: Option<Vec<usize>>,
    #[serde(default)]
    pub repetitions: Option<usize>,
    #[serde(default)]
    pub n_validation: Option<usize>,
    #[serde(default)]
    pub methods: Option<Vec<String>>,
    #[serde(default)]
    pub seed: Option<u64>,
    pub csv_out: String,
    pub summary_out: String,
    #[serde(default)]
    pub checker_rows: Option<usize>,
    #[serde(default)]
    pub checker_cols: Option<usize>,
    #[serde(default)]
    pub load_unit_scale: Option<f64>,
    #[serde(default)]
    pub truss_marginals: Option<Vec<MarginalRule>>,
    #[serde(default)]
    pub pipeline: PipelineSection,
    #[serde(default)]
    pub thresholds: Vec<ThresholdRule>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarginalRule {
    /// "gaussian", "lognormal" or "gumbel".
    pub family: String,
    pub mean: f64,
    pub cov: f64,
}

fn parse_method(name: &str) -> Result<Method> {
    Ok(match name {
        "direct" => Method::Direct,
        "hard" => Method::Hard,
        "soft" => Method::Soft,
        "categorical" => Method::Categorical,
        other => bail!("method '{other}' is not one of direct|hard|soft|categorical"),
    })
}

impl BenchConfig {
    pub fn problem(&self) -> Result<BenchProblem> {
        Ok(match self.problem.as_str() {
            "manhattan" => {
                let mut spec = ManhattanSpec::default();
                if let Some(r) = self.checker_rows {
                    spec.checker_rows = r;
                }
                if let Some(c) = self.checker_cols {
                    spec.checker_cols = c;
                }
                BenchProblem::Manhattan(spec)
            }
            "truss" => {
                let mut spec = TrussSpec::default();
                if let Some(s) = self.load_unit_scale {
                    spec.load_unit_scale = s;
                }
                if let Some(rules) = &self.truss_marginals {
                    let marginals: Result<Vec<MarginalDistribution>> = rules
                        .iter()
                        .map(|r| {
                            let family = match r.family.as_str() {
                                "gaussian" => DistFamily::Gaussian,
                                "lognormal" => DistFamily::Lognormal,
                                "gumbel" => DistFamily::Gumbel,
                                other => bail!("unknown distribution family '{other}'"),
                            };
                            MarginalDistribution::new(family, r.mean, r.cov)
                                .context("invalid truss marginal")
                        })
                        .collect();
                    spec.input_model =
                        InputModel::new(marginals?).context("invalid truss input model")?;
                }
                BenchProblem::Truss(spec)
            }
            other => bail!("problem '{other}' is not 'manhattan' or 'truss'"),
        })
    }

    pub fn settings(&self, problem: &BenchProblem) -> Result<RunSettings> {
        let mut settings = RunSettings::defaults_for(problem);
        if let Some(sizes) = &self.sizes {
            settings.sizes = sizes.clone();
        }
        if let Some(reps) = self.repetitions {
            settings.repetitions = reps;
        }
        if let Some(nv) = self.n_validation {
            settings.n_validation = nv;
        }
        if let Some(methods) = &self.methods {
            settings.methods = methods
                .iter()
                .map(|m| parse_method(m))
                .collect::<Result<Vec<_>>>()?;
        }
        if let Some(seed) = self.seed {
            settings.master_seed = seed;
        }
        settings.pipeline = self.pipeline.to_config()?;
        Ok(settings)
    }
}

pub fn load_toml<T: serde::de::DeserializeOwned>(path: &std::path::Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("config {} is invalid", path.display()))
}
