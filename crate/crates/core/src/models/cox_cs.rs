//! Cox proportional hazards with current-status data.
//!
//! Each subject is examined once at time `c` and only `delta = 1{T <= c}` is
//! recorded. For fixed `theta` the weighted log-likelihood is separable and
//! concave in the values `eta(c_(k))`, so the profile nuisance is a bounded
//! isotonic maximization, solved here by the iterative convex minorant.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::isotonic::{level_sets, pava};
use crate::models::{check_weights, dot, Nuisance, ProfileModel, StepFunction};
use crate::weights::WeightVector;

#[derive(Debug, Clone, PartialEq)]
pub struct CoxCsObs {
    pub c: f64,
    pub delta: bool,
    pub z: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoxCsData {
    obs: Vec<CoxCsObs>,
    order: Vec<usize>,
    dim: usize,
}

impl CoxCsData {
    pub fn new(obs: Vec<CoxCsObs>) -> Result<Self> {
        let first = obs.first().ok_or_else(|| Error::invalid("empty dataset"))?;
        let dim = first.z.len();
        if dim == 0 {
            return Err(Error::invalid("covariate vector must be nonempty"));
        }
        for (i, o) in obs.iter().enumerate() {
            if !(o.c >= 0.0 && o.c.is_finite()) {
                return Err(Error::invalid(format!("row {i}: examination time must be finite and >= 0")));
            }
            if o.z.len() != dim || o.z.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("row {i}: covariates must be {dim} finite values")));
            }
        }
        let mut order: Vec<usize> = (0..obs.len()).collect();
        order.sort_by(|&a, &b| obs[a].c.total_cmp(&obs[b].c));
        Ok(CoxCsData { obs, order, dim })
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

    pub fn observations(&self) -> &[CoxCsObs] {
        &self.obs
    }
}

/// `delta log(1 - exp(-eta(c) e^{theta'z})) - (1 - delta) e^{theta'z} eta(c)`;
/// `-inf` when `delta = 1` and `eta(c) = 0`.
pub fn cs_criterion(theta: &[f64], eta: &StepFunction, obs: &CoxCsObs) -> f64 {
    let a = dot(theta, &obs.z).exp();
    term(obs.delta, a, eta.eval(obs.c))
}

#[inline]
fn term(delta: bool, a: f64, v: f64) -> f64 {
    if delta {
        (-(-a * v).exp_m1()).ln()
    } else {
        -a * v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IcmOptions {
    pub max_iterations: usize,
    pub kkt_tolerance: f64,
}

impl Default for IcmOptions {
    fn default() -> Self {
        IcmOptions {
            max_iterations: 500,
            kkt_tolerance: 1e-6,
        }
    }
}

/// Rows sharing one examination time, reduced to `(w, e^{theta'z}, delta)`.
struct Group {
    time: f64,
    members: Vec<(f64, f64, bool)>,
}

impl Group {
    fn value(&self, v: f64) -> f64 {
        self.members.iter().map(|&(w, a, d)| w * term(d, a, v)).sum()
    }

    fn gradient(&self, v: f64) -> f64 {
        self.members
            .iter()
            .map(|&(w, a, d)| if d { w * a / (a * v).exp_m1() } else { -w * a })
            .sum()
    }

    /// Minus the second derivative.
    fn curvature(&self, v: f64) -> f64 {
        self.members
            .iter()
            .filter(|m| m.2)
            .map(|&(w, a, _)| {
                let x = a * v;
                w * a * a / (x.exp_m1() * -(-x).exp_m1())
            })
            .sum()
    }
}

/// Separable bounded isotonic problem for one `(theta, w)`.
struct Problem {
    groups: Vec<Group>,
    lo: f64,
    hi: f64,
}

impl Problem {
    fn new(theta: &[f64], data: &CoxCsData, w: &WeightVector, lo: f64, hi: f64) -> Self {
        let mut groups: Vec<Group> = Vec::new();
        for &i in &data.order {
            if w[i] <= 0.0 {
                continue;
            }
            let o = &data.obs[i];
            let member = (w[i], dot(theta, &o.z).exp(), o.delta);
            match groups.last_mut() {
                Some(g) if g.time == o.c => g.members.push(member),
                _ => groups.push(Group {
                    time: o.c,
                    members: vec![member],
                }),
            }
        }
        Problem { groups, lo, hi }
    }

    fn objective(&self, v: &[f64]) -> f64 {
        self.groups.iter().zip(v).map(|(g, &vk)| g.value(vk)).sum()
    }

    fn gradients(&self, v: &[f64]) -> Vec<f64> {
        self.groups.iter().zip(v).map(|(g, &vk)| g.gradient(vk)).collect()
    }

    /// Starting point from the isotonic event fraction, inverted through the
    /// mean relative risk of each group.
    fn initial(&self) -> Vec<f64> {
        let (frac, wts): (Vec<f64>, Vec<f64>) = self
            .groups
            .iter()
            .map(|g| {
                let tw: f64 = g.members.iter().map(|m| m.0).sum();
                let ev: f64 = g.members.iter().filter(|m| m.2).map(|m| m.0).sum();
                (ev / tw, tw)
            })
            .unzip();
        let iso = pava(&frac, &wts);
        let mut running = self.lo;
        self.groups
            .iter()
            .zip(iso)
            .map(|(g, p)| {
                let tw: f64 = g.members.iter().map(|m| m.0).sum();
                let abar = g.members.iter().map(|m| m.0 * m.1).sum::<f64>() / tw;
                let p = p.clamp(1e-3, 1.0 - 1e-3);
                let v = (-(-p).ln_1p() / abar).clamp(self.lo, self.hi);
                running = running.max(v);
                running
            })
            .collect()
    }

    /// Exact maximizer of a pooled block over `[lo, hi]`.
    fn block_optimum(&self, block: std::ops::Range<usize>) -> f64 {
        let grad = |v: f64| -> f64 { self.groups[block.clone()].iter().map(|g| g.gradient(v)).sum() };
        let curv = |v: f64| -> f64 { self.groups[block.clone()].iter().map(|g| g.curvature(v)).sum() };
        if grad(self.lo) <= 0.0 {
            return self.lo;
        }
        if grad(self.hi) >= 0.0 {
            return self.hi;
        }
        let (mut a, mut b) = (self.lo, self.hi);
        let mut v = 0.5 * (a + b);
        for _ in 0..200 {
            let g = grad(v);
            if g == 0.0 {
                return v;
            }
            if g > 0.0 {
                a = v;
            } else {
                b = v;
            }
            let h = curv(v);
            let newton = v + g / h;
            v = if h > 0.0 && newton > a && newton < b { newton } else { 0.5 * (a + b) };
            if b - a <= 4.0 * f64::EPSILON * b {
                break;
            }
            if g.abs() <= 1e-14 * (1.0 + h * v) {
                break;
            }
        }
        v
    }

    /// Pool-adjacent-violators on blocks whose values are exact block optima.
    fn pooled_solution(&self, seeds: &[std::ops::Range<usize>]) -> Vec<f64> {
        let mut stack: Vec<(std::ops::Range<usize>, f64)> = Vec::with_capacity(seeds.len());
        for seed in seeds {
            let mut cur = (seed.clone(), self.block_optimum(seed.clone()));
            while stack.last().is_some_and(|(_, pv)| *pv >= cur.1) {
                let (prev, _) = stack.pop().unwrap();
                let merged = prev.start..cur.0.end;
                cur = (merged.clone(), self.block_optimum(merged));
            }
            stack.push(cur);
        }
        let mut v = vec![0.0; self.groups.len()];
        for (range, value) in stack {
            for slot in &mut v[range] {
                *slot = value;
            }
        }
        v
    }

    /// Largest violation of the first-order conditions for the bounded
    /// isotonic problem, measured on level sets of `v`.
    fn kkt_residual(&self, v: &[f64]) -> f64 {
        let g = self.gradients(v);
        let mut worst: f64 = 0.0;
        for set in level_sets(v) {
            let level = v[set.start];
            let total: f64 = g[set.clone()].iter().sum();
            let at_lo = level <= self.lo;
            let at_hi = level >= self.hi;
            worst = worst.max(if at_lo {
                total.max(0.0)
            } else if at_hi {
                (-total).max(0.0)
            } else {
                total.abs()
            });
            // No split of the level set may improve: lowering a prefix needs a
            // nonnegative prefix sum, raising a suffix a nonpositive suffix sum.
            let mut prefix = 0.0;
            for gk in &g[set.start..set.end - 1] {
                prefix += gk;
                if !at_lo {
                    worst = worst.max(-prefix);
                }
                if !at_hi {
                    worst = worst.max(total - prefix);
                }
            }
        }
        worst
    }
}

/// Weighted nonparametric profile estimate of the cumulative hazard under
/// monotonicity and the bounds `lo <= eta <= hi`, returned as values at the
/// sorted positive-weight examination times.
pub fn cs_profile_nuisance(
    theta: &[f64],
    data: &CoxCsData,
    w: &WeightVector,
    bounds: (f64, f64),
) -> Result<StepFunction> {
    cs_profile_nuisance_with(theta, data, w, bounds, &IcmOptions::default()).map(|(eta, _)| eta)
}

/// As [`cs_profile_nuisance`], also returning the attained weighted criterion.
pub fn cs_profile_nuisance_with(
    theta: &[f64],
    data: &CoxCsData,
    w: &WeightVector,
    bounds: (f64, f64),
    opts: &IcmOptions,
) -> Result<(StepFunction, f64)> {
    check_weights(data.len(), w)?;
    let (lo, hi) = bounds;
    if !(0.0 < lo && lo < hi && hi.is_finite()) {
        return Err(Error::invalid("need 0 < eps_floor < M"));
    }
    if theta.len() != data.dim {
        return Err(Error::invalid("theta dimension does not match covariates"));
    }
    let problem = Problem::new(theta, data, w, lo, hi);
    let times: Vec<f64> = problem.groups.iter().map(|g| g.time).collect();
    let domain_end = data.order.last().map_or(0.0, |&i| data.obs[i].c);
    if problem.groups.is_empty() {
        return Err(Error::invalid("all weights are zero"));
    }

    let mut v = problem.initial();
    let mut f = problem.objective(&v);
    let mut residual = problem.kkt_residual(&v);
    let mut iterations = 0;
    while residual > opts.kkt_tolerance {
        if iterations >= opts.max_iterations {
            return Err(Error::IterationLimit {
                iterations,
                kkt_residual: residual,
                last: Box::new(StepFunction::from_parts_unchecked(times, v, domain_end)),
            });
        }
        iterations += 1;

        // Quadratic model with diagonal curvature; its bounded isotonic
        // maximizer is the clipped weighted PAVA of the Newton targets.
        let g = problem.gradients(&v);
        let h_raw: Vec<f64> = problem.groups.iter().zip(&v).map(|(gr, &vk)| gr.curvature(vk)).collect();
        let h_max = h_raw.iter().copied().fold(0.0, f64::max);
        let floor = 1e-12 * h_max.max(1.0);
        let h: Vec<f64> = h_raw.iter().map(|&x| x.max(floor)).collect();
        let target: Vec<f64> = v.iter().zip(&g).zip(&h).map(|((vk, gk), hk)| vk + gk / hk).collect();
        let proposal: Vec<f64> = pava(&target, &h).into_iter().map(|u| u.clamp(lo, hi)).collect();

        let slope: f64 = g.iter().zip(proposal.iter().zip(&v)).map(|(gk, (u, vk))| gk * (u - vk)).sum();
        let mut step = 1.0;
        let mut next = proposal.clone();
        let mut f_next = problem.objective(&next);
        while f_next < f + 1e-4 * step * slope && step > 1e-10 {
            step *= 0.5;
            next = v.iter().zip(&proposal).map(|(vk, u)| vk + step * (u - vk)).collect();
            f_next = problem.objective(&next);
        }
        if f_next >= f {
            v = next;
            f = f_next;
        }

        // Solve each block of the proposal exactly; keep it if it is at least as good.
        let polished = problem.pooled_solution(&level_sets(&proposal));
        let f_polished = problem.objective(&polished);
        if f_polished >= f {
            v = polished;
            f = f_polished;
        }
        residual = problem.kkt_residual(&v);
    }
    log::trace!("icm converged in {iterations} iterations, residual {residual:e}");
    Ok((StepFunction::from_parts_unchecked(times, v, domain_end), f))
}

/// KKT residual of a candidate nuisance for the weighted problem, measured at
/// the positive-weight examination times.
pub fn cs_kkt_residual(
    theta: &[f64],
    eta: &StepFunction,
    data: &CoxCsData,
    w: &WeightVector,
    bounds: (f64, f64),
) -> f64 {
    let problem = Problem::new(theta, data, w, bounds.0, bounds.1);
    let v: Vec<f64> = problem.groups.iter().map(|g| eta.eval(g.time)).collect();
    problem.kkt_residual(&v)
}

/// Weighted criterion `sum_i w_i cs_criterion`, skipping zero-weight rows.
pub fn cs_weighted_criterion(theta: &[f64], eta: &StepFunction, data: &CoxCsData, w: &WeightVector) -> f64 {
    data.obs
        .iter()
        .enumerate()
        .filter(|(i, _)| w[*i] > 0.0)
        .map(|(i, o)| w[i] * cs_criterion(theta, eta, o))
        .sum()
}

#[derive(Debug, Clone)]
pub struct CoxCsModel {
    data: CoxCsData,
    bounds: (f64, f64),
    icm: IcmOptions,
}

impl CoxCsModel {
    pub fn new(data: CoxCsData, bounds: (f64, f64), icm: IcmOptions) -> Result<Self> {
        if !(0.0 < bounds.0 && bounds.0 < bounds.1) {
            return Err(Error::invalid("need 0 < eps_floor < M"));
        }
        Ok(CoxCsModel { data, bounds, icm })
    }

    pub fn data(&self) -> &CoxCsData {
        &self.data
    }

    pub fn bounds(&self) -> (f64, f64) {
        self.bounds
    }
}

impl ProfileModel for CoxCsModel {
    fn n(&self) -> usize {
        self.data.len()
    }

    fn dim(&self) -> usize {
        self.data.dim
    }

    fn profile_criterion(&self, theta: &[f64], w: &WeightVector) -> Result<f64> {
        cs_profile_nuisance_with(theta, &self.data, w, self.bounds, &self.icm).map(|(_, f)| f)
    }

    fn profile_nuisance(&self, theta: &[f64], w: &WeightVector) -> Result<Nuisance> {
        cs_profile_nuisance_with(theta, &self.data, w, self.bounds, &self.icm).map(|(eta, _)| Nuisance::Step(eta))
    }
}
