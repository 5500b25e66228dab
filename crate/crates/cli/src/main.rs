//! Batch front end: fit a pipeline from a CSV table, predict with a stored
//! artifact, run the benchmark campaigns and summarize report files. All
//! randomness flows from a single seed, so every command is reproducible.

mod config;
mod data_io;

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use ccgp::bench::{ExperimentReport, ReportRow};
use ccgp::pipeline::{self, FittedPipeline, Prediction};

use config::{BenchConfig, FitConfig};

#[derive(Parser)]
#[command(
    name = "ccgp",
    about = "Surrogate modelling of discontinuous functions by clustering, \
             classification and local Gaussian-process regression",
    version
)]
struct Cli {
    /// Size of the worker thread pool (defaults to the core count).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PredictMode {
    Hard,
    Soft,
    Categorical,
    Direct,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a pipeline on a CSV table (inputs..., output) and store the
    /// artifact.
    Fit {
        /// TOML configuration; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Training table: M input columns then the output column.
        #[arg(long)]
        data: PathBuf,
        /// Artifact destination.
        #[arg(long)]
        out: PathBuf,
        /// Master seed; overrides the config value.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Evaluate a stored artifact on a CSV table of inputs.
    Predict {
        /// Artifact written by `fit`.
        #[arg(long)]
        artifact: PathBuf,
        /// Input table with M columns.
        #[arg(long)]
        data: PathBuf,
        /// Prediction CSV destination.
        #[arg(long)]
        out: PathBuf,
        /// Recombination mode; defaults to the mode stored in the artifact.
        #[arg(long, value_enum)]
        mode: Option<PredictMode>,
    },
    /// Run a benchmark campaign described by a TOML configuration.
    Bench {
        #[arg(long)]
        config: PathBuf,
        /// Master seed; overrides the config value.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Summarize a previously written report CSV into JSON.
    Report {
        /// Report CSV produced by `bench`.
        #[arg(long)]
        data: PathBuf,
        /// Summary JSON destination.
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() {
    env_logger::init();
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("warning: could not size the thread pool: {e}");
        }
    }
    let outcome = match cli.command {
        Command::Fit {
            config,
            data,
            out,
            seed,
        } => cmd_fit(config, data, out, seed),
        Command::Predict {
            artifact,
            data,
            out,
            mode,
        } => cmd_predict(artifact, data, out, mode),
        Command::Bench { config, seed } => cmd_bench(config, seed),
        Command::Report { data, out } => cmd_report(data, out),
    };
    if let Err(e) = outcome {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn cmd_fit(
    config: Option<PathBuf>,
    data: PathBuf,
    out: PathBuf,
    seed: Option<u64>,
) -> Result<()> {
    let cfg: FitConfig = match &config {
        Some(path) => config::load_toml(path)?,
        None => FitConfig::default(),
    };
    let seed = seed.or(cfg.seed).unwrap_or(0);
    let pipeline_cfg = cfg.pipeline.to_config()?;

    let design = data_io::read_design(&data)?;
    log::info!(
        "fitting on {} samples with {} inputs (seed {seed})",
        design.n_samples(),
        design.n_inputs()
    );
    let start = Instant::now();
    let (fitted, timings) = pipeline::fit_pipeline_timed(&design, &pipeline_cfg, seed)
        .context("pipeline fit failed")?;
    let elapsed = start.elapsed().as_secs_f64();

    let artifact = fitted.to_artifact_json().context("serialization failed")?;
    fs::write(&out, &artifact)
        .with_context(|| format!("cannot write artifact {}", out.display()))?;

    let round4 = |v: &f64| (v * 1e4).round() / 1e4;
    let mut summary = String::new();
    summary.push_str(&format!("artifact:        {}\n", out.display()));
    summary.push_str(&format!("samples:         {}\n", design.n_samples()));
    summary.push_str(&format!("inputs:          {}\n", design.n_inputs()));
    summary.push_str(&format!("seed:            {seed}\n"));
    summary.push_str(&format!("clusters (K):    {}\n", fitted.n_clusters()));
    summary.push_str(&format!(
        "stage seconds:   clustering {:.3}, classification {:.3}, regression {:.3} (total {:.3})\n",
        timings.clustering, timings.classification, timings.regression, elapsed
    ));
    if let Some(svc) = fitted.classifier() {
        for pair in &svc.pairs {
            summary.push_str(&format!(
                "pair {} vs {}:     C = {:.4e}, theta = {:?}, platt = ({:.4}, {:.4})\n",
                pair.positive,
                pair.negative,
                pair.model.penalty,
                pair.model.kernel.lengthscales().iter().map(round4).collect::<Vec<_>>(),
                pair.platt.slope,
                pair.platt.intercept,
            ));
        }
    }
    for (k, gp) in fitted.local_gps().iter().enumerate() {
        summary.push_str(&format!(
            "local model {}:   theta = {:?}, nugget = {:.1e}, n = {}\n",
            k + 1,
            gp.lengthscales().iter().map(round4).collect::<Vec<_>>(),
            gp.nugget(),
            gp.n_training(),
        ));
    }
    if let Some(cat) = fitted.categorical_gp() {
        summary.push_str(&format!(
            "categorical:     theta = {:?}, theta_cat = {:.4}\n",
            cat.lengthscales().iter().map(round4).collect::<Vec<_>>(),
            cat.theta_cat(),
        ));
    }
    print!("{summary}");
    Ok(())
}

fn cmd_predict(
    artifact: PathBuf,
    data: PathBuf,
    out: PathBuf,
    mode: Option<PredictMode>,
) -> Result<()> {
    let text = fs::read_to_string(&artifact)
        .with_context(|| format!("cannot read artifact {}", artifact.display()))?;
    let fitted = FittedPipeline::from_artifact_json(&text)
        .with_context(|| format!("artifact {} is not usable", artifact.display()))?;

    let (header, inputs) = data_io::read_inputs(&data)?;
    if inputs.ncols() != fitted.n_inputs() {
        bail!(
            "{}: table has {} input columns, artifact expects {}",
            data.display(),
            inputs.ncols(),
            fitted.n_inputs()
        );
    }

    let predict = |x: &[f64]| -> Result<Prediction> {
        Ok(match mode {
            None => fitted.predict(x)?,
            Some(PredictMode::Hard) => fitted.predict_hard(x)?,
            Some(PredictMode::Soft) => fitted.predict_soft(x)?,
            Some(PredictMode::Categorical) => fitted.predict_categorical(x)?,
            Some(PredictMode::Direct) => bail!(
                "mode 'direct' is the benchmark baseline, not an artifact mode; \
                 use hard, soft or categorical"
            ),
        })
    };

    let k = fitted.n_clusters();
    let mut w = csv::WriterBuilder::new()
        .from_path(&out)
        .with_context(|| format!("cannot write {}", out.display()))?;
    let mut head: Vec<String> = header.clone();
    head.extend(["mean".to_string(), "variance".to_string(), "label".to_string()]);
    for c in 1..=k {
        head.push(format!("class_prob_{c}"));
    }
    w.write_record(&head)?;
    for i in 0..inputs.nrows() {
        let x: Vec<f64> = inputs.row(i).iter().copied().collect();
        let p = predict(&x).with_context(|| format!("prediction failed at row {}", i + 2))?;
        let mut record: Vec<String> = x.iter().map(|v| v.to_string()).collect();
        record.push(p.mean.to_string());
        record.push(p.variance.to_string());
        record.push(p.label.to_string());
        for c in 0..k {
            record.push(p.class_probs[c].to_string());
        }
        w.write_record(&record)?;
    }
    w.flush()?;
    log::info!("wrote {} predictions to {}", inputs.nrows(), out.display());
    Ok(())
}

fn cmd_bench(config: PathBuf, seed: Option<u64>) -> Result<()> {
    let cfg: BenchConfig = config::load_toml(&config)?;
    let problem = cfg.problem()?;
    let mut settings = cfg.settings(&problem)?;
    if let Some(seed) = seed {
        settings.master_seed = seed;
    }
    log::info!(
        "running {} with sizes {:?}, {} repetitions",
        problem.name(),
        settings.sizes,
        settings.repetitions
    );
    let report = ccgp::bench::run_experiment(&problem, &settings)?;

    let mut csv_file = fs::File::create(&cfg.csv_out)
        .with_context(|| format!("cannot write {}", cfg.csv_out))?;
    report.write_csv(&mut csv_file)?;
    csv_file.flush()?;
    let mut json_file = fs::File::create(&cfg.summary_out)
        .with_context(|| format!("cannot write {}", cfg.summary_out))?;
    report.write_json_summary(&mut json_file)?;
    json_file.flush()?;

    let failures: Vec<String> = report
        .rows
        .iter()
        .filter_map(|r| {
            r.error
                .as_ref()
                .map(|e| format!("{} n={} rep={}: {e}", r.method, r.n, r.rep))
        })
        .collect();
    if !failures.is_empty() {
        eprintln!("{} cell(s) failed:", failures.len());
        for f in &failures {
            eprintln!("  {f}");
        }
    }

    let median = |values: &mut Vec<f64>| -> f64 {
        values.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        match values.len() {
            0 => f64::NAN,
            n if n % 2 == 1 => values[n / 2],
            n => 0.5 * (values[n / 2 - 1] + values[n / 2]),
        }
    };
    let mut violated = Vec::new();
    for rule in &cfg.thresholds {
        let pick = |method: &str| -> f64 {
            let mut values: Vec<f64> = report
                .rows
                .iter()
                .filter(|r| r.method == method && r.n == rule.n && r.error.is_none())
                .map(|r| match rule.metric.as_str() {
                    "mae" => r.mae,
                    _ => r.nmse,
                })
                .collect();
            median(&mut values)
        };
        let ratio = pick(&rule.method) / pick(&rule.baseline);
        let ok = ratio.is_finite() && ratio <= rule.max_median_ratio;
        println!(
            "threshold {} median {}/{} at n={}: ratio {ratio:.4} (limit {}): {}",
            rule.metric,
            rule.method,
            rule.baseline,
            rule.n,
            rule.max_median_ratio,
            if ok { "pass" } else { "FAIL" }
        );
        if !ok {
            violated.push(format!(
                "{} {}/{} at n={} is {ratio:.4} > {}",
                rule.metric, rule.method, rule.baseline, rule.n, rule.max_median_ratio
            ));
        }
    }
    if !violated.is_empty() {
        bail!(
            "{} threshold(s) violated: {}",
            violated.len(),
            violated.join("; ")
        );
    }
    Ok(())
}

fn cmd_report(data: PathBuf, out: PathBuf) -> Result<()> {
    let text = fs::read_to_string(&data)
        .with_context(|| format!("cannot read {}", data.display()))?;
    let mut master_seed = 0u64;
    let mut rows = Vec::new();
    let mut lines = text.lines().peekable();
    if let Some(first) = lines.peek() {
        if let Some(rest) = first.strip_prefix("# master_seed=") {
            master_seed = rest
                .trim()
                .parse()
                .context("malformed master_seed comment")?;
            lines.next();
        }
    }
    let header = lines.next().context("report CSV is empty")?;
    let expected = "problem,method,n,rep,seed,nmse,mae,k_clusters,fit_seconds,error";
    if header != expected {
        bail!("unexpected report header: '{header}'");
    }
    for (idx, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.splitn(10, ',').collect();
        if fields.len() != 10 {
            bail!(
                "report row {} has {} fields, expected 10",
                idx + 3,
                fields.len()
            );
        }
        let parse = |s: &str, what: &str| -> Result<f64> {
            s.parse::<f64>()
                .with_context(|| format!("row {}: bad {what}: '{s}'", idx + 3))
        };
        rows.push(ReportRow {
            problem: fields[0].to_string(),
            method: fields[1].to_string(),
            n: fields[2].parse().context("bad n")?,
            rep: fields[3].parse().context("bad rep")?,
            seed: fields[4].parse().context("bad seed")?,
            nmse: parse(fields[5], "nmse")?,
            mae: parse(fields[6], "mae")?,
            k_clusters: fields[7].parse().context("bad k_clusters")?,
            fit_seconds: parse(fields[8], "fit_seconds")?,
            error: if fields[9].is_empty() {
                None
            } else {
                Some(fields[9].to_string())
            },
        });
    }
    let report = ExperimentReport { master_seed, rows };
    let mut json_file =
        fs::File::create(&out).with_context(|| format!("cannot write {}", out.display()))?;
    report.write_json_summary(&mut json_file)?;
    json_file.flush()?;
    println!(
        "wrote summary for {} rows to {}",
        report.rows.len(),
        out.display()
    );
    Ok(())
}
