use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ExperimentConfig, RawTable, SimulationReport, Summary};
use crate::error::{Error, Result};
use crate::estimator::{fit, profile_curvature, SigmaEstimate};
use crate::inference::{ks_distance, ks_to_normal, run_bootstrap, BootstrapOptions};
use crate::models::{generate_data, Model};
use crate::rng::derive_tagged;
use crate::weights::WeightVector;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConsistencySummary {
    pub n: usize,
    pub sampling_size: usize,
    pub bootstrap_size: usize,
    pub sampling_aborted: usize,
    pub bootstrap_failures: usize,
    pub sigma_hat: Vec<Vec<f64>>,
    /// Per component: KS between `sqrt(n)(theta_r - theta_0)` and
    /// `(sqrt(n)/c)(theta*_b - theta_hat)`.
    pub ks_bootstrap_vs_sampling: Vec<f64>,
    pub ks_sampling_vs_normal: Vec<f64>,
    pub ks_bootstrap_vs_normal: Vec<f64>,
    pub sampling_variance: Vec<f64>,
    pub bootstrap_variance: Vec<f64>,
}

fn column(rows: &[Vec<f64>], j: usize) -> Vec<f64> {
    rows.iter().map(|r| r[j]).collect()
}

fn variance(v: &[f64]) -> f64 {
    let m = v.len() as f64;
    let mean = v.iter().sum::<f64>() / m;
    v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0).max(1.0)
}

/// Componentwise KS comparisons between the two rescaled samples and the
/// normal reference `N(0, sigma_jj)`.
pub fn consistency_summary(
    n: usize,
    sampling: &[Vec<f64>],
    bootstrap: &[Vec<f64>],
    sigma: &SigmaEstimate,
) -> Result<ConsistencySummary> {
    let d = sigma.dim();
    let diag = sigma.diagonal();
    let mut out = ConsistencySummary {
        n,
        sampling_size: sampling.len(),
        bootstrap_size: bootstrap.len(),
        sampling_aborted: 0,
        bootstrap_failures: 0,
        sigma_hat: sigma.matrix.clone(),
        ks_bootstrap_vs_sampling: Vec::with_capacity(d),
        ks_sampling_vs_normal: Vec::with_capacity(d),
        ks_bootstrap_vs_normal: Vec::with_capacity(d),
        sampling_variance: Vec::with_capacity(d),
        bootstrap_variance: Vec::with_capacity(d),
    };
    for (j, &var) in diag.iter().enumerate().take(d) {
        let (s, b) = (column(sampling, j), column(bootstrap, j));
        out.ks_bootstrap_vs_sampling.push(ks_distance(&s, &b)?);
        out.ks_sampling_vs_normal.push(ks_to_normal(&s, var)?);
        out.ks_bootstrap_vs_normal.push(ks_to_normal(&b, var)?);
        out.sampling_variance.push(variance(&s));
        out.bootstrap_variance.push(variance(&b));
    }
    Ok(out)
}

/// Compares the sampling law of `sqrt(n)(theta_hat - theta_0)` over fresh
/// datasets with the bootstrap law of `(sqrt(n)/c)(theta* - theta_hat)` on
/// one fixed dataset.
pub fn consistency_experiment(cfg: &ExperimentConfig) -> Result<SimulationReport> {
    cfg.validate()?;
    let n = cfg.single_n()?;
    let fit_opts = cfg.fit_options();
    let master = cfg.master_seed;
    let theta0 = &cfg.model.theta0;
    let root_n = (n as f64).sqrt();

    let sampling_runs: Vec<Option<Vec<f64>>> = (0..cfg.replications)
        .into_par_iter()
        .map(|r| -> Result<Option<Vec<f64>>> {
            let data = generate_data(&cfg.model, n, derive_tagged(master, "data", r as u64))?;
            let model = Model::new(&cfg.model, data)?;
            Ok(fit(&model, &WeightVector::unit(n), &fit_opts)
                .ok()
                .filter(|f| f.converged)
                .map(|f| f.theta_hat.iter().zip(theta0).map(|(t, t0)| root_n * (t - t0)).collect()))
        })
        .collect::<Result<_>>()?;
    let sampling_aborted = sampling_runs.iter().filter(|r| r.is_none()).count();
    let sampling: Vec<Vec<f64>> = sampling_runs.into_iter().flatten().collect();
    if sampling.is_empty() {
        return Err(Error::Optimization("every sampling replication failed".into()));
    }

    let data = generate_data(&cfg.model, n, derive_tagged(master, "fixed", 0))?;
    let model = Model::new(&cfg.model, data)?;
    let full = fit(&model, &WeightVector::unit(n), &fit_opts)?;
    if !full.converged {
        return Err(Error::Optimization(format!(
            "fit on the fixed dataset did not converge (gradient norm {:e})",
            full.gradient_norm
        )));
    }
    let sigma = profile_curvature(&model, &full.theta_hat, &fit_opts)?;
    let boot = run_bootstrap(
        &model,
        &full.theta_hat,
        cfg.scheme,
        cfg.bootstrap,
        derive_tagged(master, "boot", 0),
        &BootstrapOptions {
            fit: fit_opts.clone(),
            per_replicate_sigma: false,
        },
    )?;
    let bootstrap = boot.scaled_deviations();

    let mut summary = consistency_summary(n, &sampling, &bootstrap, &sigma)?;
    summary.sampling_aborted = sampling_aborted;
    summary.bootstrap_failures = boot.failures;

    let d = theta0.len();
    let mut columns = vec!["source".to_string(), "index".to_string()];
    columns.extend((1..=d).map(|j| format!("deviation_{j}")));
    let rows = sampling
        .iter()
        .enumerate()
        .map(|(i, s)| (0.0, i, s))
        .chain(bootstrap.iter().enumerate().map(|(i, b)| (1.0, i, b)))
        .map(|(src, i, v)| {
            let mut row = vec![src, i as f64];
            row.extend(v);
            row
        })
        .collect();

    Ok(SimulationReport {
        config: cfg.clone(),
        summary: Summary::Consistency(summary),
        raw: RawTable { columns, rows },
    })
}
