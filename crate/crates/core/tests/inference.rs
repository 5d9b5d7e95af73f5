use approx::assert_abs_diff_eq;
use proptest::prelude::*;
use semiboot::estimator::{fit, FitOptions, SigmaEstimate, VarianceMethod};
use semiboot::inference::{
    empirical_quantile, hybrid_ci, ks_distance, ks_to_normal, percentile_ci, run_bootstrap, run_bootstrap_with, t_ci,
    BootstrapOptions, BootstrapResult, CiKind, Studentization,
};
use semiboot::models::{generate_data, Model, ModelConfig, ModelKind, Theta};
use semiboot::weights::{WeightScheme, WeightVector};

fn synthetic(theta_hat: f64, reps: &[f64], n: usize) -> BootstrapResult {
    BootstrapResult {
        theta_hat: Theta::scalar(theta_hat),
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

fn spread(m: usize) -> Vec<f64> {
    (0..m).map(|i| ((i * 7919) % m) as f64 / m as f64 - 0.5).collect()
}

fn pl_setup(n: usize, seed: u64) -> (Model, FitOptions, Theta) {
    let cfg = ModelConfig::new(ModelKind::PartlyLinear);
    let model = Model::new(&cfg, generate_data(&cfg, n, seed).unwrap()).unwrap();
    let opts = FitOptions::default().with_box(cfg.theta_box());
    let theta_hat = fit(&model, &WeightVector::unit(n), &opts).unwrap().theta_hat;
    (model, opts, theta_hat)
}

/// Quantile at 1-based rank `p (m - 1) + 1` with linear interpolation.
fn rank_quantile(v: &[f64], p: f64) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let h = p * (s.len() - 1) as f64;
    let lo = h.floor();
    let below = s[lo as usize];
    let above = s[(lo as usize + 1).min(s.len() - 1)];
    below + (h - lo) * (above - below)
}

/// KS distance evaluated at every pooled sample point.
fn brute_ks(a: &[f64], b: &[f64]) -> f64 {
    let cdf = |s: &[f64], x: f64| s.iter().filter(|&&v| v <= x).count() as f64 / s.len() as f64;
    a.iter()
        .chain(b)
        .map(|&x| (cdf(a, x) - cdf(b, x)).abs())
        .fold(0.0, f64::max)
}

proptest! {
    #[test]
    fn quantile_matches_sort_oracle(v in prop::collection::vec(-100.0f64..100.0, 1..200), p in 0.0f64..=1.0) {
        let rows: Vec<Vec<f64>> = v.iter().map(|&x| vec![x, -x]).collect();
        let q = empirical_quantile(&rows, p).unwrap();
        prop_assert!((q[0] - rank_quantile(&v, p)).abs() <= 1e-12);
        let neg: Vec<f64> = v.iter().map(|x| -x).collect();
        prop_assert!((q[1] - rank_quantile(&neg, p)).abs() <= 1e-12);
    }

    #[test]
    fn ks_matches_brute_force(
        a in prop::collection::vec(-5i32..5, 1..60),
        b in prop::collection::vec(-5i32..5, 1..60),
    ) {
        // Small integer supports force many ties.
        let a: Vec<f64> = a.into_iter().map(f64::from).collect();
        let b: Vec<f64> = b.into_iter().map(f64::from).collect();
        prop_assert!((ks_distance(&a, &b).unwrap() - brute_ks(&a, &b)).abs() <= 1e-12);
    }

    #[test]
    fn ks_is_scale_and_shift_invariant(
        a in prop::collection::vec(-3.0f64..3.0, 1..80),
        b in prop::collection::vec(-3.0f64..3.0, 1..80),
        s in 0.1f64..10.0,
        m in -5.0f64..5.0,
    ) {
        let f = |v: &[f64]| v.iter().map(|x| s * x + m).collect::<Vec<_>>();
        prop_assert!((ks_distance(&a, &b).unwrap() - ks_distance(&f(&a), &f(&b)).unwrap()).abs() <= 1e-12);
    }

    #[test]
    fn intervals_are_scale_equivariant(s in 0.1f64..10.0, m in -3.0f64..3.0) {
        let reps = spread(200);
        let base = synthetic(0.1, &reps, 100);
        let moved = synthetic(s * 0.1 + m, &reps.iter().map(|r| s * r + m).collect::<Vec<_>>(), 100);
        for (a, b) in [
            (percentile_ci(&base, 0.1).unwrap(), percentile_ci(&moved, 0.1).unwrap()),
            (hybrid_ci(&base, 0.1).unwrap(), hybrid_ci(&moved, 0.1).unwrap()),
        ] {
            prop_assert!((s * a.lower[0] + m - b.lower[0]).abs() <= 1e-9);
            prop_assert!((s * a.upper[0] + m - b.upper[0]).abs() <= 1e-9);
        }
    }

    #[test]
    fn intervals_nest_as_alpha_shrinks(a1 in 0.01f64..0.5, a2 in 0.01f64..0.5) {
        let (small, large) = if a1 < a2 { (a1, a2) } else { (a2, a1) };
        let boot = synthetic(0.0, &spread(300), 100);
        let sigma = SigmaEstimate { matrix: vec![vec![0.04]], method: VarianceMethod::ProfileCurvature };
        let pairs = [
            (percentile_ci(&boot, small).unwrap(), percentile_ci(&boot, large).unwrap()),
            (hybrid_ci(&boot, small).unwrap(), hybrid_ci(&boot, large).unwrap()),
            (
                t_ci(&boot, Some(&sigma), Studentization::Shared, small).unwrap(),
                t_ci(&boot, Some(&sigma), Studentization::Shared, large).unwrap(),
            ),
        ];
        for (wide, narrow) in pairs {
            prop_assert!(wide.lower[0] <= narrow.lower[0] + 1e-12);
            prop_assert!(wide.upper[0] >= narrow.upper[0] - 1e-12);
        }
    }
}

#[test]
fn percentile_and_hybrid_formulas() {
    let reps: Vec<f64> = (0..101).map(|i| i as f64 / 100.0).collect();
    let boot = synthetic(0.3, &reps, 25);
    let p = percentile_ci(&boot, 0.1).unwrap();
    assert_abs_diff_eq!(p.lower[0], 0.05, epsilon = 1e-12);
    assert_abs_diff_eq!(p.upper[0], 0.95, epsilon = 1e-12);
    // kappa*_p = 5 (tau*_p - 0.3); the interval reflects around theta_hat.
    let h = hybrid_ci(&boot, 0.1).unwrap();
    assert_abs_diff_eq!(h.lower[0], 0.3 - (0.95 - 0.3), epsilon = 1e-12);
    assert_abs_diff_eq!(h.upper[0], 0.3 - (0.05 - 0.3), epsilon = 1e-12);
    assert_eq!(h.kind, CiKind::Hybrid);
}

#[test]
fn t_interval_falls_back_without_variance() {
    let boot = synthetic(0.0, &spread(100), 50);
    let ci = t_ci(&boot, None, Studentization::Shared, 0.05).unwrap();
    assert!(ci.fallback);
    assert_eq!(ci.kind, CiKind::T);
    let h = hybrid_ci(&boot, 0.05).unwrap();
    assert_eq!((ci.lower, ci.upper), (h.lower, h.upper));
}

#[test]
fn shared_t_interval_with_matching_sigma_equals_hybrid() {
    let boot = synthetic(0.2, &spread(120), 64);
    let sigma = SigmaEstimate { matrix: vec![vec![2.5]], method: VarianceMethod::ProfileCurvature };
    let t = t_ci(&boot, Some(&sigma), Studentization::Shared, 0.05).unwrap();
    let h = hybrid_ci(&boot, 0.05).unwrap();
    assert!(!t.fallback);
    assert_abs_diff_eq!(t.lower[0], h.lower[0], epsilon = 1e-12);
    assert_abs_diff_eq!(t.upper[0], h.upper[0], epsilon = 1e-12);
}

#[test]
fn too_few_replicates_rejected() {
    let boot = synthetic(0.0, &spread(20), 50);
    assert!(percentile_ci(&boot, 0.05).is_err());
}

#[test]
fn ks_to_normal_of_quantiles_is_small() {
    use statrs::distribution::{ContinuousCDF, Normal};
    let normal = Normal::new(0.0, 2.0).unwrap();
    let m = 1000;
    let sample: Vec<f64> = (0..m).map(|i| normal.inverse_cdf((i as f64 + 0.5) / m as f64)).collect();
    let ks = ks_to_normal(&sample, 4.0).unwrap();
    assert_abs_diff_eq!(ks, 0.5 / m as f64, epsilon = 1e-9);
    assert!(ks_to_normal(&sample, 1.0).unwrap() > 0.1);
}

#[test]
fn unit_weights_give_degenerate_intervals() {
    let (model, opts, theta_hat) = pl_setup(150, 9);
    let boot_opts = BootstrapOptions { fit: opts, per_replicate_sigma: false };
    let boot = run_bootstrap_with(&model, &theta_hat, 1.0, 60, &boot_opts, |_| Ok(WeightVector::unit(150))).unwrap();
    for r in &boot.replicates {
        assert_abs_diff_eq!(r[0], theta_hat[0], epsilon = 1e-12);
    }
    for ci in [percentile_ci(&boot, 0.05).unwrap(), hybrid_ci(&boot, 0.05).unwrap()] {
        assert_abs_diff_eq!(ci.lower[0], theta_hat[0], epsilon = 1e-12);
        assert_abs_diff_eq!(ci.upper[0], theta_hat[0], epsilon = 1e-12);
    }
    assert!(run_bootstrap(&model, &theta_hat, WeightScheme::Unit, 60, 1, &boot_opts).is_err());
}

#[test]
fn bootstrap_does_not_depend_on_worker_count() {
    let cfg = ModelConfig::new(ModelKind::CoxRc);
    let model = Model::new(&cfg, generate_data(&cfg, 80, 4).unwrap()).unwrap();
    let opts = BootstrapOptions { fit: FitOptions::default().with_box(cfg.theta_box()), per_replicate_sigma: false };
    let theta_hat = fit(&model, &WeightVector::unit(80), &opts.fit).unwrap().theta_hat;
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run_bootstrap(&model, &theta_hat, WeightScheme::Efron, 64, 42, &opts).unwrap())
    };
    let (one, three) = (run(1), run(3));
    assert_eq!(one.replicates, three.replicates);
    assert_eq!(one.indices, three.indices);
    let other_seed = run_bootstrap(&model, &theta_hat, WeightScheme::Efron, 64, 43, &opts).unwrap();
    assert_ne!(one.replicates, other_seed.replicates);
}

#[test]
fn bootstrap_mean_is_centered_at_the_estimate() {
    let (model, opts, theta_hat) = pl_setup(300, 12);
    let boot_opts = BootstrapOptions { fit: opts, per_replicate_sigma: false };
    for scheme in [WeightScheme::Efron, WeightScheme::Bayesian] {
        let boot = run_bootstrap(&model, &theta_hat, scheme, 1000, 5, &boot_opts).unwrap();
        let reps = boot.component(0);
        let m = reps.len() as f64;
        let mean = reps.iter().sum::<f64>() / m;
        let sd = (reps.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (m - 1.0)).sqrt();
        let se = sd / m.sqrt();
        assert!((mean - theta_hat[0]).abs() <= 3.0 * se, "{scheme}: mean {mean}, theta_hat {}, se {se}", theta_hat[0]);
        assert_eq!(boot.failures, 0);
    }
}

#[test]
fn per_replicate_sigmas_align_with_rows() {
    let (model, opts, theta_hat) = pl_setup(150, 2);
    let boot_opts = BootstrapOptions { fit: opts, per_replicate_sigma: true };
    let boot = run_bootstrap(&model, &theta_hat, WeightScheme::Bayesian, 60, 3, &boot_opts).unwrap();
    let sigmas = boot.sigma_star.as_ref().unwrap();
    assert_eq!(sigmas.len(), boot.replicates.len());
    let ci = t_ci(&boot, sigmas.first(), Studentization::PerReplicate(sigmas), 0.05).unwrap();
    assert!(!ci.fallback);
    assert!(ci.lower[0] < theta_hat[0] && theta_hat[0] < ci.upper[0]);
}
