use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Nondecreasing right-continuous step function, zero before the first time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepFunction {
    times: Vec<f64>,
    cum: Vec<f64>,
    domain_end: f64,
}

impl StepFunction {
    pub fn new(times: Vec<f64>, cum: Vec<f64>, domain_end: f64) -> Result<Self> {
        if times.len() != cum.len() {
            return Err(Error::invalid("step function times and values differ in length"));
        }
        if times.windows(2).any(|p| !(p[0] < p[1])) {
            return Err(Error::invalid("step function times must be strictly increasing"));
        }
        if cum.iter().any(|v| !v.is_finite() || *v < 0.0) || cum.windows(2).any(|p| p[1] < p[0]) {
            return Err(Error::invalid("step function values must be finite, nonnegative and nondecreasing"));
        }
        Ok(StepFunction { times, cum, domain_end })
    }

    pub(crate) fn from_parts_unchecked(times: Vec<f64>, cum: Vec<f64>, domain_end: f64) -> Self {
        debug_assert_eq!(times.len(), cum.len());
        StepFunction { times, cum, domain_end }
    }

    /// Builds the step function from jump sizes at increasing times.
    pub fn from_jumps(times: Vec<f64>, jumps: &[f64], domain_end: f64) -> Result<Self> {
        let cum = jumps
            .iter()
            .scan(0.0, |acc, &j| {
                *acc += j;
                Some(*acc)
            })
            .collect();
        StepFunction::new(times, cum, domain_end)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.cum
    }

    pub fn domain_end(&self) -> f64 {
        self.domain_end
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self.times.partition_point(|&x| x <= t) {
            0 => 0.0,
            k => self.cum[k - 1],
        }
    }

    /// Left limit `eta(t-)`.
    pub fn eval_left(&self, t: f64) -> f64 {
        match self.times.partition_point(|&x| x < t) {
            0 => 0.0,
            k => self.cum[k - 1],
        }
    }

    /// Point mass `eta{t} = eta(t) - eta(t-)`.
    pub fn jump_at(&self, t: f64) -> f64 {
        self.eval(t) - self.eval_left(t)
    }

    pub fn jumps(&self) -> Vec<f64> {
        let mut prev = 0.0;
        self.cum
            .iter()
            .map(|&c| {
                let j = c - prev;
                prev = c;
                j
            })
            .collect()
    }

    /// `sup_{0 <= t <= upto} |self(t) - truth(t)|` for a continuous nondecreasing `truth`.
    ///
    /// Between jumps the step function is flat, so the supremum is attained at
    /// a left or right limit at some jump time or at the window end.
    pub fn sup_distance<F: Fn(f64) -> f64>(&self, truth: F, upto: f64) -> f64 {
        let mut sup = (self.eval(upto) - truth(upto)).abs();
        sup = sup.max(truth(0.0).abs());
        let mut prev = 0.0;
        for (&t, &c) in self.times.iter().zip(&self.cum) {
            if t > upto {
                break;
            }
            let tv = truth(t);
            sup = sup.max((prev - tv).abs()).max((c - tv).abs());
            prev = c;
        }
        sup
    }
}
