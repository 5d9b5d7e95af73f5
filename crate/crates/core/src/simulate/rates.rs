use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{median, ExperimentConfig, RawTable, SimulationReport, Summary};
use crate::error::{Error, Result};
use crate::estimator::{fit, FitOptions};
use crate::inference::quantile_sorted;
use crate::models::{generate_data, Dataset, Model, ModelConfig, ModelKind, Nuisance};
use crate::rng::{derive_seed, derive_tagged};
use crate::weights::{draw_weights, WeightScheme, WeightVector};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Slope {
    pub slope: f64,
    pub std_error: f64,
    pub intercept: f64,
}

/// Least-squares slope of `log(errors)` on `log(ns)` with its standard error.
pub fn log_log_slope(ns: &[f64], errors: &[f64]) -> Result<Slope> {
    if ns.len() != errors.len() || ns.len() < 2 {
        return Err(Error::invalid("log-log regression needs at least two matching points"));
    }
    if ns.iter().chain(errors).any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::invalid("log-log regression needs positive finite values"));
    }
    let x: Vec<f64> = ns.iter().map(|v| v.ln()).collect();
    let y: Vec<f64> = errors.iter().map(|v| v.ln()).collect();
    let k = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / k, y.iter().sum::<f64>() / k);
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = x.iter().zip(&y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let std_error = if x.len() > 2 {
        (rss / (k - 2.0) / sxx).sqrt()
    } else {
        f64::NAN
    };
    Ok(Slope {
        slope,
        std_error,
        intercept,
    })
}

/// `integral_a^b (c - t)^2 dt`.
fn squared_gap_integral(c: f64, a: f64, b: f64) -> f64 {
    ((b - c).powi(3) - (a - c).powi(3)) / 3.0
}

/// Distance between a fitted nuisance and the simulation truth:
/// sup-norm on `[0, q_0.9(Y)]` for right-censored Cox, `L2(U[sigma, tau])` for
/// current status, and the empirical `L2` over the observed `Z` for the
/// partly linear model.
pub fn nuisance_error(config: &ModelConfig, data: &Dataset, eta: &Nuisance) -> Result<f64> {
    let mismatch = || Error::invalid("nuisance type does not match the model");
    match data {
        Dataset::CoxRc(d) => {
            let step = eta.as_step().ok_or_else(mismatch)?;
            let mut ys: Vec<f64> = d.observations().iter().map(|o| o.y).collect();
            ys.sort_by(f64::total_cmp);
            let tau_eval = quantile_sorted(&ys, 0.9);
            Ok(step.sup_distance(|t| config.eta0(t), tau_eval))
        }
        Dataset::CoxCs(_) => {
            // eta0(t) = t, integrated exactly against the flat pieces.
            let step = eta.as_step().ok_or_else(mismatch)?;
            let [sigma, tau] = config.exam_window;
            let mut knots = vec![sigma];
            knots.extend(step.times().iter().copied().filter(|&t| t > sigma && t < tau));
            knots.push(tau);
            let total: f64 = knots
                .windows(2)
                .map(|seg| squared_gap_integral(step.eval(seg[0]), seg[0], seg[1]))
                .sum();
            Ok((total / (tau - sigma)).sqrt())
        }
        Dataset::PartlyLinear(d) => {
            let f = eta.as_spline().ok_or_else(mismatch)?;
            let zs: Vec<f64> = d.observations().iter().map(|o| o.z).collect();
            let fitted = f.eval_many(&zs);
            let mse = zs
                .iter()
                .zip(&fitted)
                .map(|(&z, fz)| (fz - config.f0.eval(z)).powi(2))
                .sum::<f64>()
                / zs.len() as f64;
            Ok(mse.sqrt())
        }
    }
}

/// Theoretical log-log slope of the nuisance error.
pub fn expected_slope(kind: ModelKind) -> f64 {
    match kind {
        ModelKind::CoxRc => -0.5,
        ModelKind::CoxCs => -1.0 / 3.0,
        // cubic sieve, smoothness k = 2: n^{-k/(2k+1)}
        ModelKind::PartlyLinear => -0.4,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RatePoint {
    pub n: usize,
    pub median_error: f64,
    pub median_error_bootstrap: f64,
    pub failures: usize,
    pub failures_bootstrap: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RateSummary {
    pub points: Vec<RatePoint>,
    pub slope: Slope,
    pub slope_bootstrap: Slope,
    pub expected_slope: f64,
    pub gamma_target: f64,
}

fn one_error(
    cfg: &ModelConfig,
    data: &Dataset,
    model: &Model,
    w: &WeightVector,
    opts: &FitOptions,
) -> Option<f64> {
    let r = fit(model, w, opts).ok().filter(|r| r.converged)?;
    nuisance_error(cfg, data, &r.eta_hat).ok()
}

pub fn rate_experiment(cfg: &ExperimentConfig) -> Result<SimulationReport> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    if grid.len() < 4 || (grid[grid.len() - 1] as f64) < 10.0 * grid[0] as f64 {
        return Err(Error::invalid("rate experiment needs at least 4 grid points spanning a decade"));
    }
    let scheme = if cfg.scheme.is_bootstrap() {
        cfg.scheme
    } else {
        WeightScheme::Efron
    };
    let fit_opts = cfg.fit_options();
    let jobs: Vec<(usize, usize)> = grid
        .iter()
        .flat_map(|&n| (0..cfg.replications).map(move |r| (n, r)))
        .collect();
    let errors: Vec<(f64, f64)> = jobs
        .par_iter()
        .map(|&(n, r)| -> Result<(f64, f64)> {
            let stream = derive_seed(cfg.master_seed, n as u64);
            let data = generate_data(&cfg.model, n, derive_tagged(stream, "data", r as u64))?;
            let model = Model::new(&cfg.model, data.clone())?;
            let e = one_error(&cfg.model, &data, &model, &WeightVector::unit(n), &fit_opts);
            let w = draw_weights(scheme, n, derive_tagged(stream, "weights", r as u64))?;
            let e_star = one_error(&cfg.model, &data, &model, &w, &fit_opts);
            Ok((e.unwrap_or(f64::NAN), e_star.unwrap_or(f64::NAN)))
        })
        .collect::<Result<_>>()?;

    let mut points = Vec::with_capacity(grid.len());
    for (k, &n) in grid.iter().enumerate() {
        let block = &errors[k * cfg.replications..(k + 1) * cfg.replications];
        let plain: Vec<f64> = block.iter().map(|e| e.0).collect();
        let boot: Vec<f64> = block.iter().map(|e| e.1).collect();
        points.push(RatePoint {
            n,
            median_error: median(&plain),
            median_error_bootstrap: median(&boot),
            failures: plain.iter().filter(|v| !v.is_finite()).count(),
            failures_bootstrap: boot.iter().filter(|v| !v.is_finite()).count(),
        });
    }
    let ns: Vec<f64> = grid.iter().map(|&n| n as f64).collect();
    let slope = log_log_slope(&ns, &points.iter().map(|p| p.median_error).collect::<Vec<_>>())?;
    let slope_bootstrap = log_log_slope(
        &ns,
        &points.iter().map(|p| p.median_error_bootstrap).collect::<Vec<_>>(),
    )?;

    let rows = jobs
        .iter()
        .zip(&errors)
        .map(|(&(n, r), &(e, es))| vec![n as f64, r as f64, e, es])
        .collect();
    Ok(SimulationReport {
        config: cfg.clone(),
        summary: Summary::Rates(RateSummary {
            points,
            slope,
            slope_bootstrap,
            expected_slope: expected_slope(cfg.model.kind),
            gamma_target: cfg.gamma_target,
        }),
        raw: RawTable {
            columns: vec!["n".into(), "replication".into(), "error".into(), "error_bootstrap".into()],
            rows,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::StepFunction;

    #[test]
    fn exact_power_law_slope() {
        let ns = [100.0, 200.0, 400.0, 800.0, 1600.0];
        let errs: Vec<f64> = ns.iter().map(|n: &f64| 3.0 * n.powf(-0.5)).collect();
        let s = log_log_slope(&ns, &errs).unwrap();
        assert!((s.slope + 0.5).abs() < 1e-12);
        assert!(s.std_error < 1e-12);
    }

    #[test]
    fn current_status_l2_of_exact_truth_at_knots() {
        let cfg = ModelConfig::new(ModelKind::CoxCs);
        let data = generate_data(&cfg, 5, 1).unwrap();
        // Constant 1.05 on [0.1, 2.0]: mean of (1.05 - t)^2 under U[0.1, 2.0].
        let eta = Nuisance::Step(StepFunction::new(vec![0.05], vec![1.05], 2.0).unwrap());
        let e = nuisance_error(&cfg, &data, &eta).unwrap();
        let exact = ((0.95f64.powi(3) * 2.0) / 3.0 / 1.9).sqrt();
        assert!((e - exact).abs() < 1e-12);
    }

    #[test]
    fn short_grid_rejected() {
        let mut cfg = ExperimentConfig::new(ModelConfig::new(ModelKind::CoxRc));
        cfg.n_grid = Some(vec![100, 200, 400]);
        assert!(matches!(rate_experiment(&cfg), Err(Error::InvalidArgument(_))));
    }
}
