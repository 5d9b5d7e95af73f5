use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ExperimentConfig, RawTable, SimulationReport, StudentizeMode, Summary};
use crate::error::{Error, Result};
use crate::estimator::{fit, profile_curvature, FitResult, SigmaEstimate};
use crate::inference::{
    hybrid_ci, percentile_ci, run_bootstrap, t_ci, BootstrapOptions, BootstrapResult, CiKind, ConfidenceSet,
    Studentization,
};
use crate::models::{generate_data, Model, ThetaBox};
use crate::rng::derive_tagged;
use crate::weights::WeightVector;

/// Everything an interval builder may use for one replication.
pub struct IntervalContext<'a> {
    pub fit: &'a FitResult,
    pub sigma: Option<&'a SigmaEstimate>,
    pub boot: &'a BootstrapResult,
    pub alpha: f64,
    pub kinds: &'a [CiKind],
    pub theta_box: &'a ThetaBox,
}

/// Builds each requested interval kind from the replicates.
pub fn standard_intervals(ctx: &IntervalContext<'_>) -> Result<Vec<ConfidenceSet>> {
    ctx.kinds
        .iter()
        .map(|kind| match kind {
            CiKind::Percentile => percentile_ci(ctx.boot, ctx.alpha),
            CiKind::Hybrid => hybrid_ci(ctx.boot, ctx.alpha),
            CiKind::T => {
                let mode = match &ctx.boot.sigma_star {
                    Some(list) => Studentization::PerReplicate(list),
                    None => Studentization::Shared,
                };
                t_ci(ctx.boot, ctx.sigma, mode, ctx.alpha)
            }
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KindCoverage {
    pub kind: CiKind,
    /// Fraction of completed replications whose interval contains `theta_0`, per component.
    pub coverage: Vec<f64>,
    /// Binomial standard error `sqrt(p (1 - p) / R)`.
    pub std_error: Vec<f64>,
    pub mean_width: Vec<f64>,
    /// Replications where the studentized interval fell back to hybrid.
    pub fallbacks: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoverageSummary {
    pub n: usize,
    pub nominal: f64,
    pub completed: usize,
    pub aborted: usize,
    pub bootstrap_failures: usize,
    pub kinds: Vec<KindCoverage>,
}

impl CoverageSummary {
    pub fn kind(&self, kind: CiKind) -> Option<&KindCoverage> {
        self.kinds.iter().find(|k| k.kind == kind)
    }
}

struct Replication {
    theta_hat: Vec<f64>,
    intervals: Vec<ConfidenceSet>,
    boot_failures: usize,
}

pub fn coverage_experiment(cfg: &ExperimentConfig) -> Result<SimulationReport> {
    coverage_experiment_with(cfg, standard_intervals)
}

/// Coverage experiment with a custom interval builder.
pub fn coverage_experiment_with<F>(cfg: &ExperimentConfig, build: F) -> Result<SimulationReport>
where
    F: Fn(&IntervalContext<'_>) -> Result<Vec<ConfidenceSet>> + Sync,
{
    cfg.validate()?;
    let n = cfg.single_n()?;
    let fit_opts = cfg.fit_options();
    let theta_box = cfg.theta_box();
    let boot_opts = BootstrapOptions {
        fit: fit_opts.clone(),
        per_replicate_sigma: cfg.studentize == StudentizeMode::PerReplicate,
    };
    let master = cfg.master_seed;

    let outcomes: Vec<Result<Option<Replication>>> = (0..cfg.replications)
        .into_par_iter()
        .map(|r| {
            let data = generate_data(&cfg.model, n, derive_tagged(master, "data", r as u64))?;
            let model = Model::new(&cfg.model, data)?;
            let full = match fit(&model, &WeightVector::unit(n), &fit_opts) {
                Ok(f) if f.converged => f,
                Ok(_) | Err(_) => return Ok(None),
            };
            let sigma = profile_curvature(&model, &full.theta_hat, &fit_opts).ok();
            let boot = match run_bootstrap(
                &model,
                &full.theta_hat,
                cfg.scheme,
                cfg.bootstrap,
                derive_tagged(master, "boot", r as u64),
                &boot_opts,
            ) {
                Ok(b) => b,
                Err(e @ (Error::UnstableBootstrap { .. } | Error::NotBootstrapScheme)) => return Err(e),
                Err(_) => return Ok(None),
            };
            let ctx = IntervalContext {
                fit: &full,
                sigma: sigma.as_ref(),
                boot: &boot,
                alpha: cfg.alpha,
                kinds: &cfg.ci_kinds,
                theta_box: &theta_box,
            };
            Ok(Some(Replication {
                theta_hat: full.theta_hat.0.clone(),
                intervals: build(&ctx)?,
                boot_failures: boot.failures,
            }))
        })
        .collect();

    let mut done = Vec::new();
    let mut aborted = 0;
    for outcome in outcomes {
        match outcome? {
            Some(rep) => done.push(rep),
            None => aborted += 1,
        }
    }
    let theta0 = &cfg.model.theta0;
    let d = theta0.len();
    let completed = done.len();
    let kinds_out: Vec<CiKind> = done
        .first()
        .map(|rep| rep.intervals.iter().map(|ci| ci.kind).collect())
        .unwrap_or_else(|| cfg.ci_kinds.clone());

    let mut columns = vec!["replication".to_string()];
    columns.extend((1..=d).map(|j| format!("theta_hat_{j}")));
    for kind in &kinds_out {
        for j in 1..=d {
            columns.push(format!("{kind}_lower_{j}"));
            columns.push(format!("{kind}_upper_{j}"));
            columns.push(format!("{kind}_covered_{j}"));
        }
    }
    let mut rows = Vec::with_capacity(completed);
    let mut hits = vec![vec![0usize; d]; kinds_out.len()];
    let mut widths = vec![vec![0.0; d]; kinds_out.len()];
    let mut fallbacks = vec![0usize; kinds_out.len()];
    for (r, rep) in done.iter().enumerate() {
        let mut row = vec![r as f64];
        row.extend(&rep.theta_hat);
        for (k, ci) in rep.intervals.iter().enumerate() {
            let covered = ci.contains(theta0);
            fallbacks[k] += usize::from(ci.fallback);
            for j in 0..d {
                hits[k][j] += usize::from(covered[j]);
                widths[k][j] += ci.upper[j] - ci.lower[j];
                row.extend([ci.lower[j], ci.upper[j], f64::from(u8::from(covered[j]))]);
            }
        }
        rows.push(row);
    }
    let denom = completed.max(1) as f64;
    let kinds = kinds_out
        .iter()
        .enumerate()
        .map(|(k, &kind)| {
            let coverage: Vec<f64> = hits[k].iter().map(|&h| h as f64 / denom).collect();
            KindCoverage {
                kind,
                std_error: coverage.iter().map(|p| (p * (1.0 - p) / denom).sqrt()).collect(),
                coverage,
                mean_width: widths[k].iter().map(|w| w / denom).collect(),
                fallbacks: fallbacks[k],
            }
        })
        .collect();

    Ok(SimulationReport {
        config: cfg.clone(),
        summary: Summary::Coverage(CoverageSummary {
            n,
            nominal: 1.0 - cfg.alpha,
            completed,
            aborted,
            bootstrap_failures: done.iter().map(|r| r.boot_failures).sum(),
            kinds,
        }),
        raw: RawTable { columns, rows },
    })
}
