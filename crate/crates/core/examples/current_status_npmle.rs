//! Cox model with current-status data: for fixed theta the cumulative hazard
//! is a bounded monotone maximum likelihood problem, solved by the iterative
//! convex minorant.
//!
//! cargo run --example current_status_npmle

use semiboot::models::cox_cs::{cs_kkt_residual, cs_profile_nuisance};
use semiboot::models::{generate_data, Dataset, ModelConfig, ModelKind};
use semiboot::weights::WeightVector;

fn main() -> semiboot::Result<()> {
    let cfg = ModelConfig::new(ModelKind::CoxCs);
    let Dataset::CoxCs(data) = generate_data(&cfg, 200, 3)? else { unreachable!() };
    let bounds = (cfg.eps_floor, cfg.m_bound());
    let unit = WeightVector::unit(data.len());

    let eta = cs_profile_nuisance(&cfg.theta0, &data, &unit, bounds)?;
    println!("n = {}, bounds = [{:.0e}, {}]", data.len(), bounds.0, bounds.1);
    println!("KKT residual: {:.2e}", cs_kkt_residual(&cfg.theta0, &eta, &data, &unit, bounds));
    println!("   t    estimate   truth");
    for t in [0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75] {
        println!("{t:>5.2}  {:>8.4}  {:>6.3}", eta.eval(t), cfg.eta0(t));
    }
    let levels = eta.values().windows(2).filter(|p| p[1] > p[0]).count() + 1;
    println!("the estimate is a step function with {levels} distinct levels");
    Ok(())
}
