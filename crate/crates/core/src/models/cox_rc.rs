//! Cox proportional hazards with right-censored data.
//!
//! Pointwise log-likelihood with the hazard point mass at the observed time:
//! `delta * theta'z - exp(theta'z) * eta(y) + delta * log eta{y}`.

use crate::error::{Error, Result};
use crate::models::{check_weights, dot, Nuisance, ProfileModel, StepFunction};
use crate::weights::WeightVector;

#[derive(Debug, Clone, PartialEq)]
pub struct CoxRcObs {
    pub y: f64,
    pub delta: bool,
    pub z: Vec<f64>,
}

/// Right-censored observations. Rows keep their input order; a sort
/// permutation by observed time is cached for the risk-set sweeps.
#[derive(Debug, Clone, PartialEq)]
pub struct CoxRcData {
    obs: Vec<CoxRcObs>,
    order: Vec<usize>,
    dim: usize,
}

impl CoxRcData {
    pub fn new(obs: Vec<CoxRcObs>) -> Result<Self> {
        let first = obs.first().ok_or_else(|| Error::invalid("empty dataset"))?;
        let dim = first.z.len();
        if dim == 0 {
            return Err(Error::invalid("covariate vector must be nonempty"));
        }
        for (i, o) in obs.iter().enumerate() {
            if !(o.y >= 0.0 && o.y.is_finite()) {
                return Err(Error::invalid(format!("row {i}: time must be finite and >= 0")));
            }
            if o.z.len() != dim || o.z.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("row {i}: covariates must be {dim} finite values")));
            }
        }
        let mut order: Vec<usize> = (0..obs.len()).collect();
        order.sort_by(|&a, &b| obs[a].y.total_cmp(&obs[b].y));
        Ok(CoxRcData { obs, order, dim })
    }

    pub fn len(&self) -> usize {
        self.obs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.obs.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn observations(&self) -> &[CoxRcObs] {
        &self.obs
    }

    /// Row indices sorted by observed time.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// Linear predictors `theta'z_i` and their maximum, for overflow-safe exponentials.
    fn linear_predictors(&self, theta: &[f64]) -> (Vec<f64>, f64) {
        let lin: Vec<f64> = self.obs.iter().map(|o| dot(theta, &o.z)).collect();
        let shift = lin.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lin, shift)
    }

    /// Visits tie groups of observed times from the largest down, handing the
    /// callback the group's rows (sorted positions) and the weighted risk sum
    /// `sum_j w_j 1{y_j >= t} exp(theta'z_j - shift)`.
    fn sweep_risk_sets<F: FnMut(f64, &[usize], f64)>(
        &self,
        lin: &[f64],
        shift: f64,
        w: &WeightVector,
        mut visit: F,
    ) {
        let mut risk = 0.0;
        let mut end = self.order.len();
        while end > 0 {
            let t = self.obs[self.order[end - 1]].y;
            let mut start = end - 1;
            while start > 0 && self.obs[self.order[start - 1]].y == t {
                start -= 1;
            }
            let group = &self.order[start..end];
            for &i in group {
                risk += w[i] * (lin[i] - shift).exp();
            }
            visit(t, group, risk);
            end = start;
        }
    }

    fn weighted_events(&self, w: &WeightVector) -> f64 {
        self.obs
            .iter()
            .enumerate()
            .filter(|(_, o)| o.delta)
            .map(|(i, _)| w[i])
            .sum()
    }

    fn first_event_time(&self) -> f64 {
        self.order
            .iter()
            .map(|&i| &self.obs[i])
            .find(|o| o.delta)
            .map_or(f64::NAN, |o| o.y)
    }

    fn max_time(&self) -> f64 {
        self.order.last().map_or(0.0, |&i| self.obs[i].y)
    }
}

/// Pointwise log-likelihood. Returns `-inf` when `delta = 1` and `eta` puts no
/// mass at `y` (see [`cox_rc_criterion_checked`] for the error form).
pub fn cox_rc_criterion(theta: &[f64], eta: &StepFunction, obs: &CoxRcObs) -> f64 {
    let lin = dot(theta, &obs.z);
    let mut value = -lin.exp() * eta.eval(obs.y);
    if obs.delta {
        let mass = eta.jump_at(obs.y);
        if mass <= 0.0 {
            return f64::NEG_INFINITY;
        }
        value += lin + mass.ln();
    }
    value
}

pub fn cox_rc_criterion_checked(theta: &[f64], eta: &StepFunction, obs: &CoxRcObs) -> Result<f64> {
    let v = cox_rc_criterion(theta, eta, obs);
    if v == f64::NEG_INFINITY {
        Err(Error::InvalidSupport { time: obs.y })
    } else {
        Ok(v)
    }
}

/// `sum_i w_i m(theta, eta)(x_i)`, skipping zero-weight rows.
pub fn cox_rc_weighted_criterion(
    theta: &[f64],
    eta: &StepFunction,
    data: &CoxRcData,
    w: &WeightVector,
) -> f64 {
    data.obs
        .iter()
        .enumerate()
        .filter(|(i, _)| w[*i] > 0.0)
        .map(|(i, o)| w[i] * cox_rc_criterion(theta, eta, o))
        .sum()
}

/// Weighted Breslow estimator: the maximizer of the weighted log-likelihood
/// over cumulative hazards jumping only at uncensored times.
pub fn breslow_profile(theta: &[f64], data: &CoxRcData, w: &WeightVector) -> Result<StepFunction> {
    check_weights(data.len(), w)?;
    if data.weighted_events(w) <= 0.0 {
        return Err(Error::DegenerateRiskSet {
            time: data.first_event_time(),
        });
    }
    let (lin, shift) = data.linear_predictors(theta);
    let scale = (-shift).exp();
    let mut times = Vec::new();
    let mut jumps = Vec::new();
    let mut degenerate = None;
    data.sweep_risk_sets(&lin, shift, w, |t, group, risk| {
        let events: f64 = group
            .iter()
            .filter(|&&i| data.obs[i].delta)
            .map(|&i| w[i])
            .sum();
        if events > 0.0 {
            if !(risk > 0.0) {
                degenerate.get_or_insert(t);
                return;
            }
            times.push(t);
            jumps.push(events / risk * scale);
        }
    });
    if let Some(time) = degenerate {
        return Err(Error::DegenerateRiskSet { time });
    }
    times.reverse();
    jumps.reverse();
    StepFunction::from_jumps(times, &jumps, data.max_time())
}

/// Weighted log partial likelihood
/// `sum_i w_i delta_i [theta'z_i - log sum_j w_j 1{y_j >= y_i} exp(theta'z_j)]`.
///
/// Equals the weighted criterion at the Breslow profile up to a theta-free constant.
pub fn cox_rc_profile_criterion(theta: &[f64], data: &CoxRcData, w: &WeightVector) -> Result<f64> {
    check_weights(data.len(), w)?;
    if data.weighted_events(w) <= 0.0 {
        return Err(Error::DegenerateRiskSet {
            time: data.first_event_time(),
        });
    }
    let (lin, shift) = data.linear_predictors(theta);
    let mut total = 0.0;
    let mut degenerate = None;
    data.sweep_risk_sets(&lin, shift, w, |t, group, risk| {
        for &i in group {
            let o = &data.obs[i];
            if o.delta && w[i] > 0.0 {
                if !(risk > 0.0) {
                    degenerate.get_or_insert(t);
                    return;
                }
                total += w[i] * (lin[i] - shift - risk.ln());
            }
        }
    });
    match degenerate {
        Some(time) => Err(Error::DegenerateRiskSet { time }),
        None => Ok(total),
    }
}

/// Suffix sums over the time-sorted rows: `s0[k] = sum_{j>=k} e^{theta'z}`,
/// `s1[k] = sum_{j>=k} z e^{theta'z}` (unweighted, shifted scale).
struct RiskSums {
    times: Vec<f64>,
    s0: Vec<f64>,
    s1: Vec<Vec<f64>>,
}

impl RiskSums {
    fn new(theta: &[f64], data: &CoxRcData) -> Self {
        let (lin, shift) = data.linear_predictors(theta);
        let n = data.len();
        let d = data.dim;
        let mut s0 = vec![0.0; n + 1];
        let mut s1 = vec![vec![0.0; d]; n + 1];
        for k in (0..n).rev() {
            let i = data.order[k];
            let e = (lin[i] - shift).exp();
            s0[k] = s0[k + 1] + e;
            let (head, tail) = s1.split_at_mut(k + 1);
            for ((out, next), z) in head[k].iter_mut().zip(&tail[0]).zip(&data.obs[i].z) {
                *out = next + z * e;
            }
        }
        let times = data.order.iter().map(|&i| data.obs[i].y).collect();
        RiskSums { times, s0, s1 }
    }

    /// Plug-in least-favorable direction at `u`, ratio over the risk set `{y >= u}`.
    fn h_dagger(&self, u: f64) -> Result<Vec<f64>> {
        let k = self.times.partition_point(|&t| t < u);
        if k == self.times.len() || !(self.s0[k] > 0.0) {
            return Err(Error::DegenerateRiskSet { time: u });
        }
        Ok(self.s1[k].iter().map(|v| v / self.s0[k]).collect())
    }
}

fn assemble_scores(
    theta: &[f64],
    data: &CoxRcData,
    sums: &RiskSums,
    eta_at: impl Fn(f64) -> f64,
    integral_at: impl Fn(f64) -> Vec<f64>,
) -> Result<Vec<Vec<f64>>> {
    data.obs
        .iter()
        .map(|o| {
            let e = dot(theta, &o.z).exp();
            let eta_y = eta_at(o.y);
            let integral = integral_at(o.y);
            let h = if o.delta { Some(sums.h_dagger(o.y)?) } else { None };
            Ok((0..data.dim)
                .map(|j| {
                    let d = if o.delta { 1.0 } else { 0.0 };
                    let score_part = d * o.z[j] - o.z[j] * e * eta_y;
                    let h_part = h.as_ref().map_or(0.0, |h| h[j]);
                    score_part - (h_part - e * integral[j])
                })
                .collect())
        })
        .collect()
}

/// Plug-in efficient score per observation at a step-function cumulative hazard.
pub fn efficient_score_cox_rc(
    theta: &[f64],
    eta: &StepFunction,
    data: &CoxRcData,
) -> Result<Vec<Vec<f64>>> {
    if theta.len() != data.dim {
        return Err(Error::invalid("theta dimension does not match covariates"));
    }
    let sums = RiskSums::new(theta, data);
    let max_y = data.max_time();
    // prefix[k] = sum over the first k jumps of H(t_m) * jump_m
    let mut prefix = vec![vec![0.0; data.dim]];
    for (&t, jump) in eta.times().iter().zip(eta.jumps()) {
        if t > max_y {
            break;
        }
        let h = sums.h_dagger(t)?;
        let last = prefix.last().unwrap();
        let next = last.iter().zip(&h).map(|(acc, hj)| acc + hj * jump).collect();
        prefix.push(next);
    }
    let times = eta.times();
    assemble_scores(
        theta,
        data,
        &sums,
        |y| eta.eval(y),
        |y| {
            let k = times.partition_point(|&t| t <= y).min(prefix.len() - 1);
            prefix[k].clone()
        },
    )
}

/// Efficient score with the continuous cumulative hazard `eta(t) = rate * t`.
pub fn efficient_score_cox_rc_linear(
    theta: &[f64],
    rate: f64,
    data: &CoxRcData,
) -> Result<Vec<Vec<f64>>> {
    if theta.len() != data.dim {
        return Err(Error::invalid("theta dimension does not match covariates"));
    }
    let sums = RiskSums::new(theta, data);
    // Between consecutive distinct observed times the risk set {y >= u} is
    // constant, so the integral of H against rate*du is a finite sum.
    let n = sums.times.len();
    let mut knots = Vec::new();
    let mut acc = vec![0.0; data.dim];
    let mut prev = 0.0;
    let mut k = 0;
    while k < n {
        let t = sums.times[k];
        let h: Vec<f64> = sums.s1[k].iter().map(|v| v / sums.s0[k]).collect();
        for (a, hj) in acc.iter_mut().zip(&h) {
            *a += hj * rate * (t - prev);
        }
        knots.push((t, acc.clone()));
        prev = t;
        while k < n && sums.times[k] == t {
            k += 1;
        }
    }
    assemble_scores(
        theta,
        data,
        &sums,
        |y| rate * y,
        |y| {
            let idx = knots.partition_point(|(t, _)| *t < y);
            knots[idx.min(knots.len() - 1)].1.clone()
        },
    )
}

#[derive(Debug, Clone)]
pub struct CoxRcModel {
    data: CoxRcData,
}

impl CoxRcModel {
    pub fn new(data: CoxRcData) -> Self {
        CoxRcModel { data }
    }

    pub fn data(&self) -> &CoxRcData {
        &self.data
    }
}

impl ProfileModel for CoxRcModel {
    fn n(&self) -> usize {
        self.data.len()
    }

    fn dim(&self) -> usize {
        self.data.dim
    }

    fn profile_criterion(&self, theta: &[f64], w: &WeightVector) -> Result<f64> {
        cox_rc_profile_criterion(theta, &self.data, w)
    }

    fn profile_nuisance(&self, theta: &[f64], w: &WeightVector) -> Result<Nuisance> {
        breslow_profile(theta, &self.data, w).map(Nuisance::Step)
    }
}
