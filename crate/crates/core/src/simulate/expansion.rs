use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::rates::{log_log_slope, Slope};
use super::{median, ExperimentConfig, RawTable, SimulationReport, Summary};
use crate::error::{Error, Result};
use crate::estimator::{fit, profile_curvature, SigmaEstimate};
use crate::models::{efficient_score_cox_rc_linear, generate_data, Dataset, Model, ModelKind};
use crate::rng::{derive_seed, derive_tagged};
use crate::weights::{draw_weights, WeightScheme, WeightVector};

/// `sqrt(n) * deviation - Sigma * sqrt(n) * mean_score`.
///
/// With `A = -Sigma^{-1}` this is `sqrt(n)(theta - theta_ref) + A^{-1} sqrt(n) P m`,
/// the part of the deviation left over after the linear term.
pub fn expansion_remainder(n: usize, deviation: &[f64], sigma: &SigmaEstimate, mean_score: &[f64]) -> Vec<f64> {
    let root_n = (n as f64).sqrt();
    deviation
        .iter()
        .enumerate()
        .map(|(j, dj)| {
            let lin: f64 = sigma.matrix[j].iter().zip(mean_score).map(|(s, m)| s * m).sum();
            root_n * dj - root_n * lin
        })
        .collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExpansionPoint {
    pub n: usize,
    /// Median norm of `sqrt(n)(theta_hat - theta_0) - Sigma sqrt(n) P_n m0`.
    pub median_remainder: f64,
    /// Median norm of the bootstrap analog built from `G*_n m0`.
    pub median_remainder_bootstrap: f64,
    /// Median norm of `sqrt(n)(theta_hat - theta_0)` for scale.
    pub median_deviation: f64,
    pub failures: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExpansionSummary {
    pub points: Vec<ExpansionPoint>,
    pub strictly_decreasing: bool,
    pub strictly_decreasing_bootstrap: bool,
    pub slope: Slope,
    pub slope_bootstrap: Slope,
}

struct Remainders {
    plain: f64,
    boot: f64,
    deviation: f64,
}

/// Checks the first-order expansion of the Cox right-censored estimator and
/// of its bootstrap counterpart across a grid of sample sizes.
pub fn expansion_experiment(cfg: &ExperimentConfig) -> Result<SimulationReport> {
    cfg.validate()?;
    if cfg.model.kind != ModelKind::CoxRc {
        return Err(Error::UnsupportedModel(format!(
            "expansion check needs the efficient score, available for cox-rc only (got {})",
            cfg.model.kind
        )));
    }
    let grid = cfg.grid()?;
    if grid.len() < 3 {
        return Err(Error::invalid("expansion check needs at least 3 grid points"));
    }
    let scheme = if cfg.scheme.is_bootstrap() {
        cfg.scheme
    } else {
        WeightScheme::Efron
    };
    let fit_opts = cfg.fit_options();
    let theta0 = &cfg.model.theta0;
    let jobs: Vec<(usize, usize)> = grid
        .iter()
        .flat_map(|&n| (0..cfg.replications).map(move |r| (n, r)))
        .collect();

    let run = |n: usize, r: usize| -> Result<Option<Remainders>> {
        let stream = derive_seed(cfg.master_seed, n as u64);
        let data = generate_data(&cfg.model, n, derive_tagged(stream, "data", r as u64))?;
        let Dataset::CoxRc(rc) = &data else { unreachable!() };
        // eta0(t) = t has unit hazard rate.
        let scores = efficient_score_cox_rc_linear(theta0, 1.0, rc)?;
        let model = Model::new(&cfg.model, data)?;
        let Some(full) = fit(&model, &WeightVector::unit(n), &fit_opts).ok().filter(|f| f.converged) else {
            return Ok(None);
        };
        let Ok(sigma) = profile_curvature(&model, &full.theta_hat, &fit_opts) else {
            return Ok(None);
        };
        let d = theta0.len();
        let mean_score: Vec<f64> = (0..d)
            .map(|j| scores.iter().map(|s| s[j]).sum::<f64>() / n as f64)
            .collect();
        let dev: Vec<f64> = full.theta_hat.iter().zip(theta0).map(|(a, b)| a - b).collect();
        let plain = norm(&expansion_remainder(n, &dev, &sigma, &mean_score));

        let w = draw_weights(scheme, n, derive_tagged(stream, "weights", r as u64))?;
        let Some(star) = fit(&model, &w, &fit_opts).ok().filter(|f| f.converged) else {
            return Ok(None);
        };
        let centered_score: Vec<f64> = (0..d)
            .map(|j| {
                scores
                    .iter()
                    .zip(w.as_slice())
                    .map(|(s, wi)| (wi - 1.0) * s[j])
                    .sum::<f64>()
                    / n as f64
            })
            .collect();
        let dev_star: Vec<f64> = star.theta_hat.iter().zip(full.theta_hat.iter()).map(|(a, b)| a - b).collect();
        let boot = norm(&expansion_remainder(n, &dev_star, &sigma, &centered_score));
        Ok(Some(Remainders {
            plain,
            boot,
            deviation: (n as f64).sqrt() * norm(&dev),
        }))
    };
    let results: Vec<Option<Remainders>> = jobs.par_iter().map(|&(n, r)| run(n, r)).collect::<Result<_>>()?;

    let mut points = Vec::with_capacity(grid.len());
    for (k, &n) in grid.iter().enumerate() {
        let block = &results[k * cfg.replications..(k + 1) * cfg.replications];
        let ok: Vec<&Remainders> = block.iter().flatten().collect();
        points.push(ExpansionPoint {
            n,
            median_remainder: median(&ok.iter().map(|r| r.plain).collect::<Vec<_>>()),
            median_remainder_bootstrap: median(&ok.iter().map(|r| r.boot).collect::<Vec<_>>()),
            median_deviation: median(&ok.iter().map(|r| r.deviation).collect::<Vec<_>>()),
            failures: block.len() - ok.len(),
        });
    }
    let decreasing = |f: fn(&ExpansionPoint) -> f64| points.windows(2).all(|p| f(&p[1]) < f(&p[0]));
    let ns: Vec<f64> = grid.iter().map(|&n| n as f64).collect();
    let slope = log_log_slope(&ns, &points.iter().map(|p| p.median_remainder).collect::<Vec<_>>())?;
    let slope_bootstrap = log_log_slope(
        &ns,
        &points.iter().map(|p| p.median_remainder_bootstrap).collect::<Vec<_>>(),
    )?;
    let rows = jobs
        .iter()
        .zip(&results)
        .map(|(&(n, r), res)| match res {
            Some(x) => vec![n as f64, r as f64, x.plain, x.boot, x.deviation],
            None => vec![n as f64, r as f64, f64::NAN, f64::NAN, f64::NAN],
        })
        .collect();

    Ok(SimulationReport {
        config: cfg.clone(),
        summary: Summary::Expansion(ExpansionSummary {
            strictly_decreasing: decreasing(|p| p.median_remainder),
            strictly_decreasing_bootstrap: decreasing(|p| p.median_remainder_bootstrap),
            points,
            slope,
            slope_bootstrap,
        }),
        raw: RawTable {
            columns: vec![
                "n".into(),
                "replication".into(),
                "remainder".into(),
                "remainder_bootstrap".into(),
                "deviation".into(),
            ],
            rows,
        },
    })
}
