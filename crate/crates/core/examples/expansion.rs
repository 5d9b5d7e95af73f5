//! First-order expansion of the Cox estimator: the gap between
//! `sqrt(n)(theta_hat - theta0)` and its linear term in the efficient score
//! shrinks as n grows, and likewise for the bootstrap.
//!
//! cargo run --release --example expansion

use semiboot::models::{ModelConfig, ModelKind};
use semiboot::simulate::{expansion_experiment, ExperimentConfig, Summary};

fn main() -> semiboot::Result<()> {
    let mut cfg = ExperimentConfig::new(ModelConfig::new(ModelKind::CoxRc));
    cfg.n_grid = Some(vec![100, 400, 1600]);
    cfg.replications = 100;
    cfg.master_seed = 4;
    let report = expansion_experiment(&cfg)?;
    let Summary::Expansion(s) = &report.summary else { unreachable!() };
    println!("     n   remainder  bootstrap  |sqrt(n)(theta_hat - theta0)|");
    for p in &s.points {
        println!(
            "{:>6}  {:>10.5}  {:>9.5}  {:>8.4}",
            p.n, p.median_remainder, p.median_remainder_bootstrap, p.median_deviation
        );
    }
    println!(
        "log-log slope {:.3} (bootstrap {:.3}); strictly decreasing: {} / {}",
        s.slope.slope, s.slope_bootstrap.slope, s.strictly_decreasing, s.strictly_decreasing_bootstrap
    );
    Ok(())
}
