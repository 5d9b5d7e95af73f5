//! Exchangeable bootstrap weights.
//!
//! A weight draw `(W_1, ..., W_n)` is nonnegative, sums to `n`, and has a
//! permutation-invariant joint law. The limiting mean squared deviation
//! `(1/n) sum (W_i - 1)^2 -> c^2` gives the scheme constant `c` used to
//! rescale bootstrap deviations.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightScheme {
    /// Multinomial(n; 1/n, ..., 1/n) resampling counts.
    #[default]
    Efron,
    /// `n` times a flat Dirichlet vector.
    Bayesian,
    /// All ones. Not a bootstrap scheme; used for unweighted fits.
    Unit,
}

impl WeightScheme {
    /// Scheme constant `c`. Both shipped bootstrap schemes have `c = 1`.
    pub fn constant(self) -> Result<f64> {
        match self {
            WeightScheme::Efron | WeightScheme::Bayesian => Ok(1.0),
            WeightScheme::Unit => Err(Error::NotBootstrapScheme),
        }
    }

    pub fn is_bootstrap(self) -> bool {
        !matches!(self, WeightScheme::Unit)
    }
}

pub fn scheme_constant(scheme: WeightScheme) -> Result<f64> {
    scheme.constant()
}

impl fmt::Display for WeightScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            WeightScheme::Efron => "efron",
            WeightScheme::Bayesian => "bayesian",
            WeightScheme::Unit => "unit",
        })
    }
}

impl FromStr for WeightScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "efron" => Ok(WeightScheme::Efron),
            "bayesian" => Ok(WeightScheme::Bayesian),
            "unit" => Ok(WeightScheme::Unit),
            other => Err(Error::invalid(format!("unknown weight scheme `{other}`"))),
        }
    }
}

/// One draw of bootstrap weights, indexed like the dataset rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    w: Vec<f64>,
}

impl WeightVector {
    pub fn unit(n: usize) -> Self {
        WeightVector { w: vec![1.0; n] }
    }

    /// Wraps caller-supplied weights after checking nonnegativity and the
    /// sum-to-n constraint.
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.is_empty() {
            return Err(Error::invalid("weight vector must be nonempty"));
        }
        if let Some(bad) = w.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::invalid(format!("weight {bad} is negative or non-finite")));
        }
        let n = w.len() as f64;
        let sum: f64 = w.iter().sum();
        if (sum - n).abs() > 1e-9 * n.max(1.0) {
            return Err(Error::invalid(format!("weights sum to {sum}, expected {n}")));
        }
        Ok(WeightVector { w })
    }

    /// Rescales arbitrary nonnegative weights so they sum to `n`.
    pub fn normalized(raw: Vec<f64>) -> Result<Self> {
        let sum: f64 = raw.iter().sum();
        if !(sum > 0.0) {
            return Err(Error::invalid("weights must have positive total"));
        }
        let n = raw.len() as f64;
        WeightVector::new(raw.into_iter().map(|v| v * n / sum).collect())
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.w
    }

    pub fn get(&self, i: usize) -> f64 {
        self.w[i]
    }

    pub fn is_unit(&self) -> bool {
        self.w.iter().all(|&v| v == 1.0)
    }

    /// Reorders the weights so that entry `k` of the result is `self[perm[k]]`.
    pub fn permuted(&self, perm: &[usize]) -> WeightVector {
        WeightVector {
            w: perm.iter().map(|&i| self.w[i]).collect(),
        }
    }
}

impl std::ops::Index<usize> for WeightVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.w[i]
    }
}

pub fn draw_weights(scheme: WeightScheme, n: usize, seed: u64) -> Result<WeightVector> {
    if n == 0 {
        return Err(Error::invalid("weight draw requires n >= 1"));
    }
    let w = match scheme {
        WeightScheme::Unit => vec![1.0; n],
        WeightScheme::Efron => {
            let mut rng = rng_from_seed(seed);
            let mut counts = vec![0u32; n];
            for _ in 0..n {
                counts[rng.random_range(0..n)] += 1;
            }
            counts.into_iter().map(f64::from).collect()
        }
        WeightScheme::Bayesian => {
            let mut rng = rng_from_seed(seed);
            let xi: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(Exp1)).collect();
            let mean = xi.iter().sum::<f64>() / n as f64;
            xi.into_iter().map(|x| x / mean).collect()
        }
    };
    Ok(WeightVector { w })
}

/// `(1/n) sum (w_i - 1)^2`.
pub fn empirical_c_squared(w: &WeightVector) -> f64 {
    let n = w.len() as f64;
    w.as_slice().iter().map(|&v| (v - 1.0) * (v - 1.0)).sum::<f64>() / n
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_weights_are_ones() {
        let w = draw_weights(WeightScheme::Unit, 4, 99).unwrap();
        assert_eq!(w.as_slice(), &[1.0, 1.0, 1.0, 1.0]);
        assert_eq!(empirical_c_squared(&WeightVector::unit(5)), 0.0);
    }

    #[test]
    fn efron_small_draw_is_integer_and_sums_to_n() {
        for seed in 0..50 {
            let w = draw_weights(WeightScheme::Efron, 3, seed).unwrap();
            assert!(w.as_slice().iter().all(|v| v.fract() == 0.0 && *v >= 0.0));
            assert_eq!(w.as_slice().iter().sum::<f64>(), 3.0);
        }
    }

    #[test]
    fn c_squared_arithmetic() {
        let w = WeightVector::new(vec![2.0, 0.0]).unwrap();
        assert_eq!(empirical_c_squared(&w), 1.0);
    }

    #[test]
    fn zero_n_rejected() {
        assert!(matches!(
            draw_weights(WeightScheme::Efron, 0, 1),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn scheme_constants() {
        assert_eq!(WeightScheme::Efron.constant().unwrap(), 1.0);
        assert_eq!(WeightScheme::Bayesian.constant().unwrap(), 1.0);
        assert!(matches!(
            scheme_constant(WeightScheme::Unit),
            Err(Error::NotBootstrapScheme)
        ));
    }

    #[test]
    fn deterministic_given_seed() {
        for scheme in [WeightScheme::Efron, WeightScheme::Bayesian] {
            let a = draw_weights(scheme, 100, 42).unwrap();
            let b = draw_weights(scheme, 100, 42).unwrap();
            let c = draw_weights(scheme, 100, 43).unwrap();
            assert_eq!(a, b);
            assert_ne!(a, c);
        }
    }

    #[test]
    fn new_rejects_bad_sums() {
        assert!(WeightVector::new(vec![1.0, 2.0]).is_err());
        assert!(WeightVector::new(vec![-1.0, 3.0]).is_err());
        assert!(WeightVector::normalized(vec![2.0, 2.0]).unwrap().is_unit());
    }
}
