//! `semiboot` command line: fit, bootstrap, simulate and replay.
//!
//! Each command resolves its flags into a serializable plan. The plan is
//! embedded in the report's manifest, which is all `replay` needs to rerun it.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{fit, profile_curvature, FitOptions, FitResult, SigmaEstimate};
use crate::inference::{
    empirical_quantile, hybrid_ci, percentile_ci, run_bootstrap, t_ci, BootstrapOptions, CiKind, ConfidenceSet,
    Studentization,
};
use crate::models::io::read_dataset;
use crate::models::{Model, ModelConfig, ModelKind, Nuisance, ProfileModel};
use crate::report::{sha256_hex, to_json_string, RunManifest};
use crate::simulate::{run_experiment, ExperimentConfig, ExperimentKind, StudentizeMode, Summary};
use crate::weights::{WeightScheme, WeightVector};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_OPTIMIZATION: i32 = 3;
pub const EXIT_BOOTSTRAP: i32 = 4;

/// Process exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::IterationLimit { .. } | Error::Optimization(_) | Error::Curvature(_) => EXIT_OPTIMIZATION,
        Error::UnstableBootstrap { .. } => EXIT_BOOTSTRAP,
        _ => EXIT_INPUT,
    }
}

#[derive(Debug, Parser)]
#[command(name = "semiboot", version, about = "Semiparametric M-estimation with exchangeable-weight bootstrap inference")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a model to a CSV dataset.
    Fit(FitArgs),
    /// Fit, then build bootstrap confidence sets.
    Bootstrap(BootstrapArgs),
    /// Run a Monte Carlo experiment from a JSON config.
    Simulate(SimulateArgs),
    /// Rerun the command recorded in a report or manifest.
    Replay(ReplayArgs),
}

#[derive(Debug, Args)]
pub struct Output {
    /// Report path; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    #[arg(long, value_parser = parse_from_str::<ModelKind>)]
    pub model: ModelKind,
    #[arg(long)]
    pub data: PathBuf,
    /// JSON model settings (bounds, spline, theta box); `kind` is taken from `--model`.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Extra random optimizer starts.
    #[arg(long, default_value_t = 0)]
    pub starts: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-6)]
    pub tolerance: f64,
    #[arg(long, default_value_t = 200)]
    pub max_iter: usize,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Also report the profile-curvature variance estimate.
    #[arg(long)]
    pub variance: bool,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CiChoice {
    Percentile,
    Hybrid,
    T,
    All,
}

#[derive(Debug, Args)]
pub struct BootstrapArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, value_parser = parse_from_str::<WeightScheme>, default_value = "efron")]
    pub scheme: WeightScheme,
    /// Number of bootstrap replicates.
    #[arg(long = "b", short = 'B', default_value_t = 1000)]
    pub b: usize,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, value_enum, default_values_t = [CiChoice::All])]
    pub ci: Vec<CiChoice>,
    #[arg(long, value_parser = parse_from_str::<StudentizeMode>, default_value = "shared")]
    pub studentize: StudentizeMode,
    /// Write the replicate matrix as CSV.
    #[arg(long)]
    pub replicates: Option<PathBuf>,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_parser = parse_from_str::<ExperimentKind>)]
    pub experiment: ExperimentKind,
    #[arg(long)]
    pub config: PathBuf,
    /// Write per-replication records as CSV.
    #[arg(long)]
    pub raw: Option<PathBuf>,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    /// A report written by this tool, or its bare manifest.
    pub manifest: PathBuf,
    #[command(flatten)]
    pub output: Output,
}

fn parse_from_str<T: std::str::FromStr<Err = Error>>(s: &str) -> std::result::Result<T, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Resolved inputs of `fit`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitPlan {
    pub model: ModelConfig,
    pub data: PathBuf,
    pub fit: FitOptions,
    pub variance: bool,
}

/// Resolved inputs of `bootstrap`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BootstrapPlan {
    pub model: ModelConfig,
    pub data: PathBuf,
    pub fit: FitOptions,
    pub scheme: WeightScheme,
    #[serde(rename = "B")]
    pub b: usize,
    pub alpha: f64,
    pub ci: Vec<CiKind>,
    pub studentize: StudentizeMode,
}

/// Resolved inputs of `simulate`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulatePlan {
    pub experiment: ExperimentKind,
    pub config: ExperimentConfig,
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum NuisanceView {
    Step {
        times: Vec<f64>,
        jumps: Vec<f64>,
        cum: Vec<f64>,
    },
    Spline {
        degree: usize,
        interior_knots: Vec<f64>,
        coefficients: Vec<f64>,
        centering_offset: f64,
    },
}

impl From<&Nuisance> for NuisanceView {
    fn from(eta: &Nuisance) -> Self {
        match eta {
            Nuisance::Step(s) => NuisanceView::Step {
                times: s.times().to_vec(),
                jumps: s.jumps(),
                cum: s.values().to_vec(),
            },
            Nuisance::Spline(f) => NuisanceView::Spline {
                degree: f.degree,
                interior_knots: f.interior_knots.clone(),
                coefficients: f.coefficients.clone(),
                centering_offset: f.centering_offset,
            },
        }
    }
}

#[derive(Debug, Serialize)]
struct FitSection {
    theta_hat: Vec<f64>,
    criterion: f64,
    converged: bool,
    iterations: usize,
    gradient_norm: f64,
    eta_hat: NuisanceView,
}

impl From<&FitResult> for FitSection {
    fn from(r: &FitResult) -> Self {
        FitSection {
            theta_hat: r.theta_hat.0.clone(),
            criterion: r.criterion,
            converged: r.converged,
            iterations: r.iterations,
            gradient_norm: r.gradient_norm,
            eta_hat: (&r.eta_hat).into(),
        }
    }
}

#[derive(Debug, Serialize)]
struct FitReport {
    manifest: RunManifest,
    fit: FitSection,
    #[serde(skip_serializing_if = "Option::is_none")]
    sigma_hat: Option<SigmaEstimate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sigma_error: Option<String>,
}

#[derive(Debug, Serialize)]
struct QuantileRow {
    p: f64,
    values: Vec<f64>,
}

#[derive(Debug, Serialize)]
struct BootstrapReport {
    manifest: RunManifest,
    theta_hat: Vec<f64>,
    scheme: WeightScheme,
    c: f64,
    #[serde(rename = "B")]
    b: usize,
    failures: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    first_failure: Option<String>,
    quantiles: Vec<QuantileRow>,
    intervals: Vec<ConfidenceSet>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sigma_hat: Option<SigmaEstimate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sigma_error: Option<String>,
}

#[derive(Debug, Serialize)]
struct SimulateReport<'a> {
    manifest: RunManifest,
    summary: &'a Summary,
}

/// Report text plus the exit code it should produce.
pub struct Finished {
    pub report: String,
    pub exit: i32,
}

fn model_config(kind: ModelKind, path: Option<&Path>) -> Result<ModelConfig> {
    let Some(path) = path else {
        return Ok(ModelConfig::new(kind));
    };
    let text = fs::read_to_string(path)?;
    let mut value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let obj = value
        .as_object_mut()
        .ok_or_else(|| Error::Config(format!("{}: expected a JSON object", path.display())))?;
    if let Some(k) = obj.get("kind").and_then(|k| k.as_str()) {
        if k != kind.as_str() {
            return Err(Error::Config(format!("config kind `{k}` conflicts with --model {kind}")));
        }
    }
    obj.insert("kind".into(), serde_json::Value::String(kind.as_str().into()));
    let cfg: ModelConfig =
        serde_json::from_value(value).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    cfg.validate()?;
    Ok(cfg)
}

fn fit_options(cfg: &ModelConfig, args: &ModelArgs) -> FitOptions {
    FitOptions {
        tolerance: args.tolerance,
        max_iterations: args.max_iter,
        theta_box: Some(cfg.theta_box()),
        starts: args.starts,
        start_seed: args.seed,
        hessian_step: None,
    }
}

fn load_model(cfg: &ModelConfig, path: &Path) -> Result<(Model, String)> {
    let bytes = fs::read(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let hash = sha256_hex(&bytes);
    let data = read_dataset(cfg.kind, bytes.as_slice())?;
    Ok((Model::new(cfg, data)?, hash))
}

fn report_trace(r: &FitResult) {
    eprintln!(
        "optimizer did not converge after {} iterations (gradient norm {:e})",
        r.iterations, r.gradient_norm
    );
    for t in r.trace.iter().rev().take(10).rev() {
        eprintln!(
            "  iter {:>3}  criterion {:.10e}  |grad| {:.3e}  step {:.3e}",
            t.iteration, t.value, t.gradient_norm, t.step
        );
    }
}

pub fn execute_fit(plan: &FitPlan, expected_hash: Option<&str>) -> Result<Finished> {
    let (model, hash) = load_model(&plan.model, &plan.data)?;
    check_hash(expected_hash, &hash)?;
    let manifest = RunManifest::new("fit", serde_json::to_value(plan)?, plan.fit.start_seed, hash);
    let result = fit(&model, &WeightVector::unit(model.n()), &plan.fit)?;
    let mut exit = EXIT_OK;
    if !result.converged {
        report_trace(&result);
        exit = EXIT_OPTIMIZATION;
    }
    let (sigma_hat, sigma_error) = if plan.variance {
        match profile_curvature(&model, &result.theta_hat, &plan.fit) {
            Ok(s) => (Some(s), None),
            Err(e) => {
                eprintln!("error: {e}");
                exit = exit.max(exit_code(&e));
                (None, Some(e.to_string()))
            }
        }
    } else {
        (None, None)
    };
    let report = FitReport {
        manifest: manifest.finish(),
        fit: (&result).into(),
        sigma_hat,
        sigma_error,
    };
    Ok(Finished {
        report: to_json_string(&report)?,
        exit,
    })
}

fn check_hash(expected: Option<&str>, actual: &str) -> Result<()> {
    match expected {
        Some(e) if e != actual => Err(Error::Config(format!(
            "input file changed since the manifest was written (sha256 {actual}, expected {e})"
        ))),
        _ => Ok(()),
    }
}

/// Runs the bootstrap and returns the report plus the replicate CSV text.
pub fn execute_bootstrap(plan: &BootstrapPlan, expected_hash: Option<&str>) -> Result<(Finished, String)> {
    let (model, hash) = load_model(&plan.model, &plan.data)?;
    check_hash(expected_hash, &hash)?;
    let manifest = RunManifest::new("bootstrap", serde_json::to_value(plan)?, plan.fit.start_seed, hash);
    let n = model.n();
    let full = fit(&model, &WeightVector::unit(n), &plan.fit)?;
    if !full.converged {
        report_trace(&full);
        return Err(Error::Optimization("full-sample fit did not converge".into()));
    }
    let boot = run_bootstrap(
        &model,
        &full.theta_hat,
        plan.scheme,
        plan.b,
        plan.fit.start_seed,
        &BootstrapOptions {
            fit: plan.fit.clone(),
            per_replicate_sigma: plan.studentize == StudentizeMode::PerReplicate && plan.ci.contains(&CiKind::T),
        },
    )?;
    let wants_t = plan.ci.contains(&CiKind::T);
    let (sigma_hat, sigma_error) = if wants_t {
        match profile_curvature(&model, &full.theta_hat, &plan.fit) {
            Ok(s) => (Some(s), None),
            Err(e) => (None, Some(e.to_string())),
        }
    } else {
        (None, None)
    };
    let intervals = plan
        .ci
        .iter()
        .map(|kind| match kind {
            CiKind::Percentile => percentile_ci(&boot, plan.alpha),
            CiKind::Hybrid => hybrid_ci(&boot, plan.alpha),
            CiKind::T => {
                let mode = boot
                    .sigma_star
                    .as_deref()
                    .map_or(Studentization::Shared, Studentization::PerReplicate);
                t_ci(&boot, sigma_hat.as_ref(), mode, plan.alpha)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let mut levels = vec![plan.alpha / 2.0, 0.25, 0.5, 0.75, 1.0 - plan.alpha / 2.0];
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    let quantiles = levels
        .into_iter()
        .map(|p| empirical_quantile(&boot.replicates, p).map(|values| QuantileRow { p, values }))
        .collect::<Result<Vec<_>>>()?;

    let mut csv_out = Vec::new();
    {
        let mut wtr = csv::Writer::from_writer(&mut csv_out);
        let mut header = vec!["replicate".to_string()];
        header.extend((1..=boot.dim()).map(|j| format!("theta_{j}")));
        wtr.write_record(&header)?;
        for (idx, row) in boot.indices.iter().zip(&boot.replicates) {
            let mut rec = vec![idx.to_string()];
            rec.extend(row.iter().map(|v| format!("{v:?}")));
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
    }

    let report = BootstrapReport {
        manifest: manifest.finish(),
        theta_hat: full.theta_hat.0.clone(),
        scheme: plan.scheme,
        c: boot.c,
        b: plan.b,
        failures: boot.failures,
        first_failure: boot.first_failure.clone(),
        quantiles,
        intervals,
        sigma_hat,
        sigma_error,
    };
    Ok((
        Finished {
            report: to_json_string(&report)?,
            exit: EXIT_OK,
        },
        String::from_utf8(csv_out).expect("csv output is UTF-8"),
    ))
}

/// Runs an experiment and returns the report plus the raw-record CSV text.
pub fn execute_simulate(plan: &SimulatePlan) -> Result<(Finished, String)> {
    let canonical = serde_json::to_vec(&plan.config)?;
    let manifest = RunManifest::new(
        "simulate",
        serde_json::to_value(plan)?,
        plan.config.master_seed,
        sha256_hex(&canonical),
    );
    let out = run_experiment(plan.experiment, &plan.config)?;
    let mut raw = Vec::new();
    out.raw.write_csv(&mut raw)?;
    let report = SimulateReport {
        manifest: manifest.finish(),
        summary: &out.summary,
    };
    Ok((
        Finished {
            report: to_json_string(&report)?,
            exit: EXIT_OK,
        },
        String::from_utf8(raw).expect("csv output is UTF-8"),
    ))
}

fn write_output(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text)?,
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
        }
    }
    Ok(())
}

fn with_jobs<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match jobs {
        None => Ok(f()),
        Some(0) => Err(Error::invalid("--jobs must be at least 1")),
        Some(j) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(j)
                .build()
                .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

fn run_command(command: Command) -> Result<i32> {
    match command {
        Command::Fit(args) => {
            let model = model_config(args.model.model, args.model.config.as_deref())?;
            let plan = FitPlan {
                fit: fit_options(&model, &args.model),
                model,
                data: args.model.data.clone(),
                variance: args.variance,
            };
            let done = with_jobs(args.output.jobs, || execute_fit(&plan, None))??;
            write_output(args.output.out.as_deref(), &done.report)?;
            Ok(done.exit)
        }
        Command::Bootstrap(args) => {
            let model = model_config(args.model.model, args.model.config.as_deref())?;
            let ci = if args.ci.contains(&CiChoice::All) {
                CiKind::ALL.to_vec()
            } else {
                let mut kinds: Vec<CiKind> = Vec::new();
                for choice in &args.ci {
                    let kind = match choice {
                        CiChoice::Percentile => CiKind::Percentile,
                        CiChoice::Hybrid => CiKind::Hybrid,
                        CiChoice::T | CiChoice::All => CiKind::T,
                    };
                    if !kinds.contains(&kind) {
                        kinds.push(kind);
                    }
                }
                kinds
            };
            let plan = BootstrapPlan {
                fit: fit_options(&model, &args.model),
                model,
                data: args.model.data.clone(),
                scheme: args.scheme,
                b: args.b,
                alpha: args.alpha,
                ci,
                studentize: args.studentize,
            };
            let (done, csv_text) = with_jobs(args.output.jobs, || execute_bootstrap(&plan, None))??;
            if let Some(path) = &args.replicates {
                fs::write(path, csv_text)?;
            }
            write_output(args.output.out.as_deref(), &done.report)?;
            Ok(done.exit)
        }
        Command::Simulate(args) => {
            let text = fs::read_to_string(&args.config)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", args.config.display())))?;
            let config: ExperimentConfig = serde_json::from_str(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", args.config.display())))?;
            let plan = SimulatePlan {
                experiment: args.experiment,
                config,
            };
            let (done, raw) = with_jobs(args.output.jobs, || execute_simulate(&plan))??;
            if let Some(path) = &args.raw {
                fs::write(path, raw)?;
            }
            write_output(args.output.out.as_deref(), &done.report)?;
            Ok(done.exit)
        }
        Command::Replay(args) => {
            let text = fs::read_to_string(&args.manifest)?;
            let mut value: serde_json::Value = serde_json::from_str(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", args.manifest.display())))?;
            if let Some(inner) = value.get_mut("manifest") {
                value = inner.take();
            }
            let manifest: RunManifest = serde_json::from_value(value)
                .map_err(|e| Error::Config(format!("{}: not a manifest: {e}", args.manifest.display())))?;
            if manifest.version != env!("CARGO_PKG_VERSION") {
                log::warn!(
                    "manifest was written by version {}, replaying with {}",
                    manifest.version,
                    env!("CARGO_PKG_VERSION")
                );
            }
            let bad_config = |e: serde_json::Error| Error::Config(format!("manifest config: {e}"));
            let done = match manifest.command.as_str() {
                "fit" => {
                    let plan: FitPlan = serde_json::from_value(manifest.config.clone()).map_err(bad_config)?;
                    with_jobs(args.output.jobs, || execute_fit(&plan, Some(&manifest.input_sha256)))??
                }
                "bootstrap" => {
                    let plan: BootstrapPlan = serde_json::from_value(manifest.config.clone()).map_err(bad_config)?;
                    with_jobs(args.output.jobs, || execute_bootstrap(&plan, Some(&manifest.input_sha256)))??.0
                }
                "simulate" => {
                    let plan: SimulatePlan = serde_json::from_value(manifest.config.clone()).map_err(bad_config)?;
                    with_jobs(args.output.jobs, || execute_simulate(&plan))??.0
                }
                other => return Err(Error::Config(format!("unknown command `{other}` in manifest"))),
            };
            write_output(args.output.out.as_deref(), &done.report)?;
            Ok(done.exit)
        }
    }
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run_command(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
