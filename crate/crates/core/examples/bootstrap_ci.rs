//! Exchangeable-weight bootstrap for the Cox model: refit under Efron and
//! Bayesian weights and build percentile, hybrid and studentized intervals.
//!
//! cargo run --release --example bootstrap_ci

use semiboot::estimator::{fit, profile_curvature, FitOptions};
use semiboot::inference::{hybrid_ci, percentile_ci, run_bootstrap, t_ci, BootstrapOptions, Studentization};
use semiboot::models::{generate_data, Model, ModelConfig, ModelKind};
use semiboot::weights::{WeightScheme, WeightVector};

fn main() -> semiboot::Result<()> {
    let cfg = ModelConfig::new(ModelKind::CoxRc);
    let n = 300;
    let model = Model::new(&cfg, generate_data(&cfg, n, 42)?)?;
    let opts = FitOptions::default().with_box(cfg.theta_box());
    let full = fit(&model, &WeightVector::unit(n), &opts)?;
    let sigma = profile_curvature(&model, &full.theta_hat, &opts)?;
    println!("theta_hat = {:.4}, Sigma_hat = {:.3}", full.theta_hat[0], sigma.matrix[0][0]);

    let boot_opts = BootstrapOptions { fit: opts, per_replicate_sigma: false };
    for scheme in [WeightScheme::Efron, WeightScheme::Bayesian] {
        let boot = run_bootstrap(&model, &full.theta_hat, scheme, 1000, 7, &boot_opts)?;
        println!("\n{scheme} bootstrap: {} replicates, {} failures, c = {}", boot.replicates.len(), boot.failures, boot.c);
        for ci in [
            percentile_ci(&boot, 0.05)?,
            hybrid_ci(&boot, 0.05)?,
            t_ci(&boot, Some(&sigma), Studentization::Shared, 0.05)?,
        ] {
            println!("  {:>10}: [{:.4}, {:.4}]", ci.kind.to_string(), ci.lower[0], ci.upper[0]);
        }
    }
    let wald = 1.96 * (sigma.matrix[0][0] / n as f64).sqrt();
    println!("\nWald interval for comparison: [{:.4}, {:.4}]", full.theta_hat[0] - wald, full.theta_hat[0] + wald);
    Ok(())
}
