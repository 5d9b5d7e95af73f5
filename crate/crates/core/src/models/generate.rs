use rand::Rng;
use rand_distr::{Exp1, StandardNormal};

use crate::error::{Error, Result};
use crate::models::{
    dot, Censoring, CoxCsData, CoxCsObs, CoxRcData, CoxRcObs, Dataset, ModelConfig, ModelKind,
    PartlyLinearData, PartlyLinearObs,
};
use crate::rng::{rng_from_seed, SimRng};

/// `P(T <= C)` for `T | Z ~ Exp(e^{theta'Z})`, `C ~ Exp(rate)` and
/// `Z ~ U[0,1]^d`, by a tensor midpoint rule over the covariate cube.
pub fn expected_event_fraction(theta0: &[f64], rate: f64) -> f64 {
    if rate <= 0.0 {
        return 1.0;
    }
    let d = theta0.len();
    let per_axis = ((20_000f64).powf(1.0 / d as f64).floor() as usize).max(2);
    let total = per_axis.pow(d as u32);
    let mut z = vec![0.0; d];
    let mut acc = 0.0;
    for flat in 0..total {
        let mut rem = flat;
        for zj in z.iter_mut() {
            *zj = ((rem % per_axis) as f64 + 0.5) / per_axis as f64;
            rem /= per_axis;
        }
        let hazard = dot(theta0, &z).exp();
        acc += hazard / (hazard + rate);
    }
    acc / total as f64
}

/// Exponential censoring rate giving the requested expected censored fraction.
fn rate_for_fraction(theta0: &[f64], fraction: f64) -> f64 {
    if fraction <= 0.0 {
        return 0.0;
    }
    let target = 1.0 - fraction;
    let (mut lo, mut hi) = (-20.0f64, 20.0f64);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if expected_event_fraction(theta0, mid.exp()) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (0.5 * (lo + hi)).exp()
}

fn draw_covariates(rng: &mut SimRng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.random::<f64>()).collect()
}

fn draw_event_time(rng: &mut SimRng, theta0: &[f64], z: &[f64]) -> f64 {
    let e: f64 = rng.sample(Exp1);
    e / dot(theta0, z).exp()
}

/// Simulates `n` rows from the configured model. Deterministic given `seed`.
pub fn generate_data(config: &ModelConfig, n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::invalid("sample size must be positive"));
    }
    config.validate()?;
    let mut rng = rng_from_seed(seed);
    let theta0 = &config.theta0;
    let d = config.dim();
    Ok(match config.kind {
        ModelKind::CoxRc => {
            let rate = match config.censoring {
                Censoring::None => 0.0,
                Censoring::Rate(r) => r,
                Censoring::Fraction(f) => rate_for_fraction(theta0, f),
            };
            let obs = (0..n)
                .map(|_| {
                    let z = draw_covariates(&mut rng, d);
                    let t = draw_event_time(&mut rng, theta0, &z);
                    let e: f64 = rng.sample(Exp1);
                    let c = if rate > 0.0 { e / rate } else { f64::INFINITY };
                    CoxRcObs {
                        y: t.min(c),
                        delta: t <= c,
                        z,
                    }
                })
                .collect();
            Dataset::CoxRc(CoxRcData::new(obs)?)
        }
        ModelKind::CoxCs => {
            let [sigma, tau] = config.exam_window;
            let obs = (0..n)
                .map(|_| {
                    let z = draw_covariates(&mut rng, d);
                    let t = draw_event_time(&mut rng, theta0, &z);
                    let c = sigma + (tau - sigma) * rng.random::<f64>();
                    CoxCsObs { c, delta: t <= c, z }
                })
                .collect();
            Dataset::CoxCs(CoxCsData::new(obs)?)
        }
        ModelKind::PartlyLinear => {
            let obs = (0..n)
                .map(|_| {
                    let w: f64 = rng.random();
                    let z: f64 = rng.random();
                    let xi: f64 = rng.sample(StandardNormal);
                    PartlyLinearObs {
                        y: theta0[0] * w + config.f0.eval(z) + config.noise_sd * xi,
                        w,
                        z,
                    }
                })
                .collect();
            Dataset::PartlyLinear(PartlyLinearData::new(obs)?)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_rows_rejected() {
        let cfg = ModelConfig::new(ModelKind::CoxRc);
        assert!(matches!(generate_data(&cfg, 0, 1), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn zero_rate_means_no_censoring() {
        let mut cfg = ModelConfig::new(ModelKind::CoxRc);
        cfg.censoring = Censoring::Rate(0.0);
        let Dataset::CoxRc(data) = generate_data(&cfg, 500, 3).unwrap() else {
            unreachable!()
        };
        assert!(data.observations().iter().all(|o| o.delta));
    }

    #[test]
    fn fraction_solver_hits_target() {
        let rate = rate_for_fraction(&[0.5], 0.25);
        assert!((expected_event_fraction(&[0.5], rate) - 0.75).abs() < 1e-9);
        // d = 1 closed form: (1/theta) log((e^theta + rate) / (1 + rate))
        let closed = (((0.5f64).exp() + rate) / (1.0 + rate)).ln() / 0.5;
        assert!((closed - 0.75).abs() < 1e-6);
    }

    #[test]
    fn deterministic_given_seed() {
        for kind in [ModelKind::CoxRc, ModelKind::CoxCs, ModelKind::PartlyLinear] {
            let cfg = ModelConfig::new(kind);
            assert_eq!(generate_data(&cfg, 50, 9).unwrap(), generate_data(&cfg, 50, 9).unwrap());
            assert_ne!(generate_data(&cfg, 50, 9).unwrap(), generate_data(&cfg, 50, 10).unwrap());
        }
    }
}
