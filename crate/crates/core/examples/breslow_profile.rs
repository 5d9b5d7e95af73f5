//! Cox model with right censoring: the weighted Breslow estimator is the
//! profile nuisance, and the partial likelihood is the profile criterion.
//!
//! cargo run --example breslow_profile

use semiboot::models::cox_rc::{breslow_profile, cox_rc_profile_criterion, cox_rc_weighted_criterion};
use semiboot::models::{CoxRcData, CoxRcObs};
use semiboot::weights::WeightVector;

fn main() -> semiboot::Result<()> {
    // (time, event indicator, covariate)
    let rows = [(0.4, true, 1.0), (0.9, false, 0.0), (1.3, true, 0.5), (2.1, true, 0.0), (3.0, false, 1.0)];
    let data = CoxRcData::new(rows.iter().map(|&(y, delta, z)| CoxRcObs { y, delta, z: vec![z] }).collect())?;
    let unit = WeightVector::unit(data.len());

    let theta = [0.5];
    let eta = breslow_profile(&theta, &data, &unit)?;
    println!("Breslow cumulative hazard at theta = {}:", theta[0]);
    for (t, (cum, jump)) in eta.times().iter().zip(eta.values().iter().zip(eta.jumps())) {
        println!("  t = {t:.2}  jump = {jump:.4}  cumulative = {cum:.4}");
    }

    // The full criterion at the Breslow profile and the partial likelihood
    // differ by a constant that does not depend on theta.
    for t in [-1.0, 0.0, 0.5, 1.0] {
        let eta = breslow_profile(&[t], &data, &unit)?;
        let full = cox_rc_weighted_criterion(&[t], &eta, &data, &unit);
        let partial = cox_rc_profile_criterion(&[t], &data, &unit)?;
        println!("theta = {t:>4}: full = {full:>9.5}  partial = {partial:>9.5}  gap = {:.5}", full - partial);
    }

    // Bootstrap weights enter as case weights. A zero weight drops the row.
    let w = WeightVector::new(vec![2.0, 1.0, 0.0, 1.0, 1.0])?;
    let weighted = breslow_profile(&theta, &data, &w)?;
    println!("with weights {:?} the hazard jumps only at {:?}", w.as_slice(), weighted.times());
    Ok(())
}
