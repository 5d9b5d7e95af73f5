//! Convergence rates of the nuisance estimators, read off a log-log fit of
//! median error against n.
//!
//! cargo run --release --example rates

use semiboot::models::{ModelConfig, ModelKind};
use semiboot::simulate::{rate_experiment, ExperimentConfig, Summary};

fn main() -> semiboot::Result<()> {
    for (kind, gamma) in [(ModelKind::CoxRc, 0.5), (ModelKind::PartlyLinear, 0.4), (ModelKind::CoxCs, 0.3334)] {
        let mut cfg = ExperimentConfig::new(ModelConfig::new(kind));
        cfg.n_grid = Some(vec![100, 200, 400, 800, 1600]);
        cfg.replications = if kind == ModelKind::CoxCs { 20 } else { 50 };
        cfg.gamma_target = gamma;
        cfg.master_seed = 2;
        let report = rate_experiment(&cfg)?;
        let Summary::Rates(s) = &report.summary else { unreachable!() };
        println!("{kind} (expected slope {:.3}):", s.expected_slope);
        for p in &s.points {
            println!("  n = {:>5}: median error {:.4}, bootstrap {:.4}", p.n, p.median_error, p.median_error_bootstrap);
        }
        println!(
            "  slope {:.3} +/- {:.3}, bootstrap slope {:.3}",
            s.slope.slope, s.slope.std_error, s.slope_bootstrap.slope
        );
    }
    Ok(())
}
