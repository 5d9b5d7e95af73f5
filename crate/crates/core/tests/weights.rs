use proptest::prelude::*;
use semiboot::inference::ks_distance;
use semiboot::weights::{draw_weights, empirical_c_squared, WeightScheme, WeightVector};
use statrs::distribution::{Binomial, Discrete};

const SCHEMES: [WeightScheme; 2] = [WeightScheme::Efron, WeightScheme::Bayesian];

/// Two-sample KS rejection threshold at level 0.01 (asymptotic).
fn ks_critical_01(m: usize, n: usize) -> f64 {
    1.628 * (((m + n) as f64) / (m * n) as f64).sqrt()
}

fn draws(scheme: WeightScheme, n: usize, count: u64) -> Vec<WeightVector> {
    (0..count).map(|s| draw_weights(scheme, n, 1000 + s).unwrap()).collect()
}

#[test]
fn weights_are_nonnegative_and_sum_to_n() {
    for scheme in SCHEMES {
        for w in draws(scheme, 1000, 500) {
            assert!(w.as_slice().iter().all(|&v| v >= 0.0));
            let total: f64 = w.as_slice().iter().sum();
            assert!((total - 1000.0).abs() <= 1e-9, "{scheme}: sum {total}");
        }
    }
}

#[test]
fn efron_weights_are_exact_counts() {
    for w in draws(WeightScheme::Efron, 1000, 100) {
        assert!(w.as_slice().iter().all(|v| v.fract() == 0.0));
        assert_eq!(w.as_slice().iter().sum::<f64>(), 1000.0);
    }
}

#[test]
fn mean_c_squared_near_one() {
    for scheme in SCHEMES {
        let all = draws(scheme, 1000, 500);
        let mean = all.iter().map(empirical_c_squared).sum::<f64>() / all.len() as f64;
        assert!((0.9..=1.1).contains(&mean), "{scheme}: mean c^2 = {mean}");
        assert_eq!(scheme.constant().unwrap(), 1.0);
    }
}

#[test]
fn coordinates_are_exchangeable() {
    let n = 1000;
    for scheme in SCHEMES {
        let all = draws(scheme, n, 500);
        let first: Vec<f64> = all.iter().map(|w| w[0]).collect();
        let crit = ks_critical_01(all.len(), all.len());
        for j in [1, n / 2, n - 1] {
            let other: Vec<f64> = all.iter().map(|w| w[j]).collect();
            let ks = ks_distance(&first, &other).unwrap();
            assert!(ks <= crit, "{scheme}: KS(W_1, W_{}) = {ks} > {crit}", j + 1);
        }
    }
}

#[test]
fn efron_marginal_matches_binomial_pmf() {
    let n = 10;
    let reps = 4000;
    let mut counts = [0usize; 11];
    for s in 0..reps {
        for &v in draw_weights(WeightScheme::Efron, n, s).unwrap().as_slice() {
            counts[v as usize] += 1;
        }
    }
    let total = (reps * n as u64) as f64;
    let pmf = Binomial::new(1.0 / n as f64, n as u64).unwrap();
    for (k, &c) in counts.iter().enumerate().take(4) {
        let p = pmf.pmf(k as u64);
        let freq = c as f64 / total;
        // Coordinates within a draw are dependent, so allow a generous band.
        let se = (p * (1.0 - p) / reps as f64).sqrt();
        assert!((freq - p).abs() <= 5.0 * se, "k={k}: freq {freq} vs pmf {p}");
    }
}

#[test]
fn bayesian_marginal_variance() {
    // n * Beta(1, n - 1) has variance (n - 1) / (n + 1).
    let n = 20;
    let vals: Vec<f64> = (0..5000)
        .flat_map(|s| draw_weights(WeightScheme::Bayesian, n, s).unwrap().as_slice().to_vec())
        .collect();
    let mean = vals.iter().sum::<f64>() / vals.len() as f64;
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / vals.len() as f64;
    let target = (n as f64 - 1.0) / (n as f64 + 1.0);
    assert!((mean - 1.0).abs() < 1e-12);
    assert!((var - target).abs() < 0.05, "variance {var} vs {target}");
}

#[test]
fn draws_are_deterministic_per_seed() {
    for scheme in SCHEMES {
        let a = draw_weights(scheme, 50, 77).unwrap();
        let b = draw_weights(scheme, 50, 77).unwrap();
        let c = draw_weights(scheme, 50, 78).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}

#[test]
fn unit_scheme_is_not_a_bootstrap() {
    assert!(WeightScheme::Unit.constant().is_err());
    assert!(draw_weights(WeightScheme::Efron, 0, 1).is_err());
}

proptest! {
    #[test]
    fn any_draw_is_valid(n in 1usize..300, seed in any::<u64>(), bayes in any::<bool>()) {
        let scheme = if bayes { WeightScheme::Bayesian } else { WeightScheme::Efron };
        let w = draw_weights(scheme, n, seed).unwrap();
        prop_assert_eq!(w.len(), n);
        prop_assert!(w.as_slice().iter().all(|&v| v >= 0.0 && v.is_finite()));
        let total: f64 = w.as_slice().iter().sum();
        prop_assert!((total - n as f64).abs() <= 1e-9 * n as f64);
    }
}
