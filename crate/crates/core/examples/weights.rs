//! Exchangeable bootstrap weights: draw Efron and Bayesian weight vectors and
//! check the properties the bootstrap relies on.
//!
//! cargo run --example weights

use semiboot::rng::derive_seed;
use semiboot::weights::{draw_weights, empirical_c_squared, WeightScheme};

fn main() -> semiboot::Result<()> {
    let n = 10;
    for scheme in [WeightScheme::Efron, WeightScheme::Bayesian] {
        let w = draw_weights(scheme, n, derive_seed(2024, 0))?;
        let shown: Vec<String> = w.as_slice().iter().map(|v| format!("{v:.2}")).collect();
        println!("{scheme:>8}: [{}]  sum = {:.1}", shown.join(", "), w.as_slice().iter().sum::<f64>());

        // c^2 is the limit of (1/n) sum (W_i - 1)^2; both schemes have c = 1.
        let draws = 200;
        let mean_c2 = (0..draws)
            .map(|b| draw_weights(scheme, 1000, derive_seed(7, b)).map(|w| empirical_c_squared(&w)))
            .sum::<semiboot::Result<f64>>()?
            / draws as f64;
        println!("          mean empirical c^2 at n = 1000: {mean_c2:.4} (scheme constant c = {})", scheme.constant()?);
    }
    println!("unit weights are rejected as a bootstrap: {}", WeightScheme::Unit.constant().unwrap_err());
    Ok(())
}
