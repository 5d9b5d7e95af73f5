//! The bootstrap imitates the sampling distribution: compare the scaled
//! bootstrap deviations on one dataset with scaled estimation errors across
//! fresh datasets, and both with the normal limit.
//!
//! cargo run --release --example distributional_imitation

use semiboot::models::{ModelConfig, ModelKind};
use semiboot::simulate::{consistency_experiment, ExperimentConfig, Summary};

fn main() -> semiboot::Result<()> {
    let mut cfg = ExperimentConfig::new(ModelConfig::new(ModelKind::CoxRc));
    cfg.n = Some(400);
    cfg.replications = 300;
    cfg.bootstrap = 500;
    cfg.master_seed = 1;
    let report = consistency_experiment(&cfg)?;
    let Summary::Consistency(s) = &report.summary else { unreachable!() };
    println!("n = {}, sampling fits = {}, bootstrap replicates = {}", s.n, s.sampling_size, s.bootstrap_size);
    println!("Sigma_hat                      = {:.3}", s.sigma_hat[0][0]);
    println!("variance of sqrt(n)(theta_hat - theta0) = {:.3}", s.sampling_variance[0]);
    println!("variance of sqrt(n)(theta* - theta_hat) = {:.3}", s.bootstrap_variance[0]);
    println!("KS bootstrap vs sampling       = {:.4}", s.ks_bootstrap_vs_sampling[0]);
    println!("KS sampling vs N(0, Sigma_hat) = {:.4}", s.ks_sampling_vs_normal[0]);
    println!("KS bootstrap vs N(0, Sigma_hat) = {:.4}", s.ks_bootstrap_vs_normal[0]);
    Ok(())
}
