//! Bootstrap replicates and the confidence sets built from them.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::estimator::{fit, profile_curvature_weighted, FitOptions, SigmaEstimate};
use crate::models::{ProfileModel, Theta};
use crate::rng::derive_seed;
use crate::weights::{draw_weights, WeightScheme, WeightVector};

/// Largest tolerated fraction of failed replicates.
pub const MAX_FAILURE_FRACTION: f64 = 0.05;

/// Fewest replicates accepted by the interval constructors.
pub const MIN_REPLICATES: usize = 50;

#[derive(Debug, Clone, Default)]
pub struct BootstrapOptions {
    pub fit: FitOptions,
    /// Also estimate the profile curvature under each replicate's weights.
    pub per_replicate_sigma: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BootstrapResult {
    pub theta_hat: Theta,
    /// One row per successful replicate, in replicate-index order.
    pub replicates: Vec<Vec<f64>>,
    /// Replicate index `b` of each row.
    pub indices: Vec<usize>,
    pub c: f64,
    pub n: usize,
    /// Number of replicates requested.
    pub b: usize,
    pub failures: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub first_failure: Option<String>,
    /// Per-replicate variance estimates, aligned with `replicates`.
    #[serde(skip)]
    pub sigma_star: Option<Vec<SigmaEstimate>>,
}

impl BootstrapResult {
    pub fn dim(&self) -> usize {
        self.theta_hat.len()
    }

    /// Rescaled deviations `(sqrt(n) / c) (theta*_b - theta_hat)`.
    pub fn scaled_deviations(&self) -> Vec<Vec<f64>> {
        let k = (self.n as f64).sqrt() / self.c;
        self.replicates
            .iter()
            .map(|r| r.iter().zip(self.theta_hat.iter()).map(|(t, h)| k * (t - h)).collect())
            .collect()
    }

    pub fn component(&self, j: usize) -> Vec<f64> {
        self.replicates.iter().map(|r| r[j]).collect()
    }
}

/// Runs `b` weighted refits with weights drawn from `scheme`. Replicate `i`
/// uses seed `derive_seed(master_seed, i)`, so results do not depend on
/// scheduling.
pub fn run_bootstrap<M: ProfileModel + ?Sized>(
    model: &M,
    theta_hat: &Theta,
    scheme: WeightScheme,
    b: usize,
    master_seed: u64,
    opts: &BootstrapOptions,
) -> Result<BootstrapResult> {
    let c = scheme.constant()?;
    let n = model.n();
    run_bootstrap_with(model, theta_hat, c, b, opts, |i| {
        draw_weights(scheme, n, derive_seed(master_seed, i as u64))
    })
}

/// [`run_bootstrap`] with a caller-supplied weight source.
pub fn run_bootstrap_with<M, W>(
    model: &M,
    theta_hat: &Theta,
    c: f64,
    b: usize,
    opts: &BootstrapOptions,
    weights: W,
) -> Result<BootstrapResult>
where
    M: ProfileModel + ?Sized,
    W: Fn(usize) -> Result<WeightVector> + Sync,
{
    if b == 0 {
        return Err(Error::invalid("number of bootstrap replicates must be positive"));
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::NotBootstrapScheme);
    }
    let outcomes: Vec<Result<(Vec<f64>, Option<SigmaEstimate>)>> = (0..b)
        .into_par_iter()
        .map(|i| {
            let w = weights(i)?;
            let r = fit(model, &w, &opts.fit)?;
            if !r.converged {
                return Err(Error::Optimization(format!(
                    "replicate {i} did not converge (gradient norm {:e})",
                    r.gradient_norm
                )));
            }
            let sigma = if opts.per_replicate_sigma {
                Some(profile_curvature_weighted(model, &w, &r.theta_hat, &opts.fit)?)
            } else {
                None
            };
            Ok((r.theta_hat.into_inner(), sigma))
        })
        .collect();

    let mut replicates = Vec::with_capacity(b);
    let mut indices = Vec::with_capacity(b);
    let mut sigmas = Vec::new();
    let mut failures = 0;
    let mut first_failure = None;
    for (i, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok((theta, sigma)) => {
                replicates.push(theta);
                indices.push(i);
                sigmas.extend(sigma);
            }
            Err(e) => {
                failures += 1;
                first_failure.get_or_insert_with(|| format!("replicate {i}: {e}"));
            }
        }
    }
    if failures as f64 > MAX_FAILURE_FRACTION * b as f64 {
        return Err(Error::UnstableBootstrap {
            failures,
            total: b,
            first: first_failure.unwrap_or_default(),
        });
    }
    if failures > 0 {
        log::warn!("{failures} of {b} bootstrap replicates failed and were excluded");
    }
    Ok(BootstrapResult {
        theta_hat: theta_hat.clone(),
        replicates,
        indices,
        c,
        n: model.n(),
        b,
        failures,
        first_failure,
        sigma_star: opts.per_replicate_sigma.then_some(sigmas),
    })
}

/// Componentwise empirical quantile, linearly interpolated at 1-based rank
/// `p (m - 1) + 1`.
pub fn empirical_quantile(samples: &[Vec<f64>], p: f64) -> Result<Vec<f64>> {
    let Some(first) = samples.first() else {
        return Err(Error::invalid("quantile of an empty sample"));
    };
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid(format!("quantile level {p} outside [0, 1]")));
    }
    Ok((0..first.len())
        .map(|j| {
            let mut col: Vec<f64> = samples.iter().map(|r| r[j]).collect();
            col.sort_by(f64::total_cmp);
            quantile_sorted(&col, p)
        })
        .collect())
}

pub(crate) fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = pos - lo as f64;
    if frac == 0.0 {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[hi] - sorted[lo])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CiKind {
    Percentile,
    Hybrid,
    T,
}

impl CiKind {
    pub const ALL: [CiKind; 3] = [CiKind::Percentile, CiKind::Hybrid, CiKind::T];

    pub fn as_str(self) -> &'static str {
        match self {
            CiKind::Percentile => "percentile",
            CiKind::Hybrid => "hybrid",
            CiKind::T => "t",
        }
    }
}

impl std::fmt::Display for CiKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.pad(self.as_str())
    }
}

/// Rectangular confidence set built from componentwise quantiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceSet {
    pub kind: CiKind,
    pub level: f64,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Set when a studentized interval could not be formed and the hybrid
    /// interval was returned instead.
    pub fallback: bool,
}

impl ConfidenceSet {
    pub fn contains(&self, theta: &[f64]) -> Vec<bool> {
        theta
            .iter()
            .enumerate()
            .map(|(j, &t)| self.lower[j] <= t && t <= self.upper[j])
            .collect()
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

fn check_replicates(boot: &BootstrapResult) -> Result<()> {
    if boot.replicates.len() < MIN_REPLICATES {
        return Err(Error::InsufficientReplicates {
            needed: MIN_REPLICATES,
            available: boot.replicates.len(),
        });
    }
    Ok(())
}

/// `[theta_hat + (tau*_{a/2} - theta_hat)/c, theta_hat + (tau*_{1-a/2} - theta_hat)/c]`.
pub fn percentile_ci(boot: &BootstrapResult, alpha: f64) -> Result<ConfidenceSet> {
    check_alpha(alpha)?;
    check_replicates(boot)?;
    let lo = empirical_quantile(&boot.replicates, alpha / 2.0)?;
    let hi = empirical_quantile(&boot.replicates, 1.0 - alpha / 2.0)?;
    let th = &boot.theta_hat;
    Ok(ConfidenceSet {
        kind: CiKind::Percentile,
        level: 1.0 - alpha,
        lower: (0..th.len()).map(|j| th[j] + (lo[j] - th[j]) / boot.c).collect(),
        upper: (0..th.len()).map(|j| th[j] + (hi[j] - th[j]) / boot.c).collect(),
        fallback: false,
    })
}

/// Recentered interval from `kappa*_p = (sqrt(n)/c)(tau*_p - theta_hat)`.
pub fn hybrid_ci(boot: &BootstrapResult, alpha: f64) -> Result<ConfidenceSet> {
    check_alpha(alpha)?;
    check_replicates(boot)?;
    let root_n = (boot.n as f64).sqrt();
    let kappa = empirical_quantile(&boot.scaled_deviations(), alpha / 2.0)?;
    let kappa_hi = empirical_quantile(&boot.scaled_deviations(), 1.0 - alpha / 2.0)?;
    let th = &boot.theta_hat;
    Ok(ConfidenceSet {
        kind: CiKind::Hybrid,
        level: 1.0 - alpha,
        lower: (0..th.len()).map(|j| th[j] - kappa_hi[j] / root_n).collect(),
        upper: (0..th.len()).map(|j| th[j] - kappa[j] / root_n).collect(),
        fallback: false,
    })
}

/// Which variance estimate studentizes each replicate.
#[derive(Debug, Clone, Copy)]
pub enum Studentization<'a> {
    /// Every replicate uses the full-sample estimate.
    Shared,
    /// One estimate per replicate row.
    PerReplicate(&'a [SigmaEstimate]),
}

/// Studentized interval. Falls back to [`hybrid_ci`] with `fallback = true`
/// when a variance estimate is missing or not positive definite.
pub fn t_ci(
    boot: &BootstrapResult,
    sigma_hat: Option<&SigmaEstimate>,
    sigma_star: Studentization<'_>,
    alpha: f64,
) -> Result<ConfidenceSet> {
    check_alpha(alpha)?;
    check_replicates(boot)?;
    let fallback = || {
        hybrid_ci(boot, alpha).map(|mut ci| {
            ci.kind = CiKind::T;
            ci.fallback = true;
            ci
        })
    };
    let d = boot.dim();
    let usable = |s: &SigmaEstimate| s.dim() == d && s.is_positive_definite();
    let Some(sigma_hat) = sigma_hat.filter(|s| usable(s)) else {
        return fallback();
    };
    let star_sd: Vec<Vec<f64>> = match sigma_star {
        Studentization::Shared => {
            let sd: Vec<f64> = sigma_hat.diagonal().iter().map(|v| v.sqrt()).collect();
            vec![sd; boot.replicates.len()]
        }
        Studentization::PerReplicate(list) => {
            if list.len() != boot.replicates.len() || !list.iter().all(usable) {
                return fallback();
            }
            list.iter().map(|s| s.diagonal().iter().map(|v| v.sqrt()).collect()).collect()
        }
    };
    let t_star: Vec<Vec<f64>> = boot
        .scaled_deviations()
        .into_iter()
        .zip(&star_sd)
        .map(|(dev, sd)| dev.iter().zip(sd).map(|(x, s)| x / s).collect())
        .collect();
    let omega_lo = empirical_quantile(&t_star, alpha / 2.0)?;
    let omega_hi = empirical_quantile(&t_star, 1.0 - alpha / 2.0)?;
    let root_n = (boot.n as f64).sqrt();
    let sd_hat: Vec<f64> = sigma_hat.diagonal().iter().map(|v| v.sqrt()).collect();
    let th = &boot.theta_hat;
    Ok(ConfidenceSet {
        kind: CiKind::T,
        level: 1.0 - alpha,
        lower: (0..d).map(|j| th[j] - sd_hat[j] * omega_hi[j] / root_n).collect(),
        upper: (0..d).map(|j| th[j] - sd_hat[j] * omega_lo[j] / root_n).collect(),
        fallback: false,
    })
}

fn sorted(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

/// Two-sample Kolmogorov-Smirnov statistic `sup_x |F_a(x) - F_b(x)|`.
pub fn ks_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("KS distance needs two nonempty samples"));
    }
    let (a, b) = (sorted(a), sorted(b));
    let (m, l) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut best: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        best = best.max((i as f64 / m - j as f64 / l).abs());
    }
    Ok(best)
}

/// One-sample KS distance to `N(0, variance)`.
pub fn ks_to_normal(sample: &[f64], variance: f64) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::invalid("KS distance needs a nonempty sample"));
    }
    if !(variance > 0.0 && variance.is_finite()) {
        return Err(Error::invalid(format!("reference variance must be positive, got {variance}")));
    }
    let normal = Normal::new(0.0, variance.sqrt()).map_err(|e| Error::invalid(e.to_string()))?;
    let s = sorted(sample);
    let m = s.len() as f64;
    Ok(s.iter().enumerate().fold(0.0f64, |acc, (i, &x)| {
        let f = normal.cdf(x);
        acc.max(((i + 1) as f64 / m - f).abs()).max((f - i as f64 / m).abs())
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn boot_from(theta_hat: f64, reps: &[f64], n: usize) -> BootstrapResult {
        BootstrapResult {
            theta_hat: Theta(vec![theta_hat]),
            replicates: reps.iter().map(|&r| vec![r]).collect(),
            indices: (0..reps.len()).collect(),
            c: 1.0,
            n,
            b: reps.len(),
            failures: 0,
            first_failure: None,
            sigma_star: None,
        }
    }

    #[test]
    fn quantile_midpoint() {
        let s: Vec<Vec<f64>> = [1.0, 2.0, 3.0, 4.0].iter().map(|&v| vec![v]).collect();
        assert_eq!(empirical_quantile(&s, 0.5).unwrap(), vec![2.5]);
        assert_eq!(empirical_quantile(&s, 0.0).unwrap(), vec![1.0]);
        assert_eq!(empirical_quantile(&s, 1.0).unwrap(), vec![4.0]);
        assert!(empirical_quantile(&[], 0.5).is_err());
    }

    #[test]
    fn constant_replicates_give_degenerate_intervals() {
        let boot = boot_from(0.4, &[0.4; 60], 100);
        for ci in [
            percentile_ci(&boot, 0.05).unwrap(),
            hybrid_ci(&boot, 0.05).unwrap(),
            t_ci(&boot, None, Studentization::Shared, 0.05).unwrap(),
        ] {
            assert_eq!(ci.lower, vec![0.4]);
            assert_eq!(ci.upper, vec![0.4]);
        }
    }

    #[test]
    fn too_few_replicates() {
        let boot = boot_from(0.0, &[0.0; 49], 10);
        assert!(matches!(
            percentile_ci(&boot, 0.1),
            Err(Error::InsufficientReplicates { needed: 50, available: 49 })
        ));
    }

    #[test]
    fn hybrid_collapses_for_unit_c() {
        let reps: Vec<f64> = (0..101).map(|i| (i as f64 / 100.0).powi(2)).collect();
        let boot = boot_from(0.3, &reps, 100);
        let p = percentile_ci(&boot, 0.1).unwrap();
        let h = hybrid_ci(&boot, 0.1).unwrap();
        assert!((h.lower[0] - (0.6 - p.upper[0])).abs() < 1e-12);
        assert!((h.upper[0] - (0.6 - p.lower[0])).abs() < 1e-12);
    }

    #[test]
    fn t_with_identity_sigma_equals_hybrid() {
        let reps: Vec<f64> = (0..80).map(|i| ((i * 37) % 80) as f64 / 40.0 - 0.7).collect();
        let boot = boot_from(0.2, &reps, 64);
        let id = SigmaEstimate {
            matrix: vec![vec![1.0]],
            method: crate::estimator::VarianceMethod::ProfileCurvature,
        };
        let t = t_ci(&boot, Some(&id), Studentization::Shared, 0.05).unwrap();
        let h = hybrid_ci(&boot, 0.05).unwrap();
        assert!(!t.fallback);
        assert!((t.lower[0] - h.lower[0]).abs() < 1e-12 && (t.upper[0] - h.upper[0]).abs() < 1e-12);
        let per = vec![id.clone(); 80];
        let t2 = t_ci(&boot, Some(&id), Studentization::PerReplicate(&per), 0.05).unwrap();
        assert_eq!(t, t2);
    }

    #[test]
    fn non_pd_sigma_falls_back() {
        let boot = boot_from(0.0, &(0..60).map(|i| i as f64).collect::<Vec<_>>(), 10);
        let bad = SigmaEstimate {
            matrix: vec![vec![-1.0]],
            method: crate::estimator::VarianceMethod::ProfileCurvature,
        };
        let t = t_ci(&boot, Some(&bad), Studentization::Shared, 0.05).unwrap();
        assert!(t.fallback);
        assert_eq!(t.kind, CiKind::T);
    }

    #[test]
    fn ks_basics() {
        assert_eq!(ks_distance(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(ks_distance(&[0.0], &[1.0]).unwrap(), 1.0);
        assert!((ks_distance(&[0.0, 1.0], &[1.0]).unwrap() - 0.5).abs() < 1e-15);
        assert!(ks_distance(&[], &[1.0]).is_err());
    }
}
