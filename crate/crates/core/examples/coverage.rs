//! Monte Carlo coverage of the three bootstrap intervals. The acceptance
//! configs use R = 500 and B = 500; this runs a smaller design.
//!
//! cargo run --release --example coverage -- [replications] [bootstrap]

use semiboot::models::{ModelConfig, ModelKind};
use semiboot::simulate::{coverage_experiment, ExperimentConfig, Summary};

fn main() -> semiboot::Result<()> {
    let mut args = std::env::args().skip(1);
    let replications = args.next().map_or(100, |s| s.parse().expect("integer"));
    let bootstrap = args.next().map_or(200, |s| s.parse().expect("integer"));
    for kind in [ModelKind::PartlyLinear, ModelKind::CoxRc] {
        let mut cfg = ExperimentConfig::new(ModelConfig::new(kind));
        cfg.n = Some(200);
        cfg.replications = replications;
        cfg.bootstrap = bootstrap;
        cfg.master_seed = 3;
        let report = coverage_experiment(&cfg)?;
        let Summary::Coverage(s) = &report.summary else { unreachable!() };
        println!("{kind}: n = {}, R = {}, B = {}, nominal {:.2}", s.n, s.completed, bootstrap, s.nominal);
        for k in &s.kinds {
            println!(
                "  {:>10}: coverage {:.3} +/- {:.3}, mean width {:.3}",
                k.kind.to_string(),
                k.coverage[0],
                k.std_error[0],
                k.mean_width[0]
            );
        }
    }
    Ok(())
}
