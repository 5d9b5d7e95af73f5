//! Brute-force oracles shared by the oracle tests and the acceptance suite.
//! Each `*_gap` function returns the largest deviation between the library
//! and an independent computation.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use semiboot::estimator::{fit, FitOptions};
use semiboot::models::cox_cs::{cs_kkt_residual, cs_profile_nuisance};
use semiboot::models::cox_rc::breslow_profile;
use semiboot::models::{
    generate_data, CoxCsData, CoxCsObs, CoxRcData, CoxRcModel, CoxRcObs, Dataset, ModelConfig, ModelKind,
    PartlyLinearModel, SplineSettings, ThetaBox,
};
use semiboot::weights::{draw_weights, WeightScheme, WeightVector};

pub type Row = (f64, bool, f64);

pub fn rc(rows: &[Row]) -> CoxRcData {
    CoxRcData::new(rows.iter().map(|&(y, delta, z)| CoxRcObs { y, delta, z: vec![z] }).collect()).unwrap()
}

pub fn cs(rows: &[Row]) -> CoxCsData {
    CoxCsData::new(rows.iter().map(|&(c, delta, z)| CoxCsObs { c, delta, z: vec![z] }).collect()).unwrap()
}

/// Weighted Cox log-likelihood for hazard jumps `jumps[k]` at `times[k]`.
pub fn rc_loglik(theta: f64, rows: &[Row], w: &[f64], times: &[f64], jumps: &[f64]) -> f64 {
    rows.iter()
        .zip(w)
        .filter(|(_, &wi)| wi > 0.0)
        .map(|(&(y, delta, z), &wi)| {
            let cum: f64 = times.iter().zip(jumps).filter(|(t, _)| **t <= y).map(|(_, j)| j).sum();
            let mut v = -(theta * z).exp() * cum;
            if delta {
                let k = times.iter().position(|&t| t == y).unwrap();
                v += theta * z + jumps[k].ln();
            }
            wi * v
        })
        .sum()
}

/// Coarse-to-fine grid maximizer over `[0, hi]^k`.
pub fn grid_argmax(k: usize, hi: f64, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let mut center = vec![hi / 2.0; k];
    let mut half = hi / 2.0;
    let points = 41;
    for _ in 0..6 {
        let step = 2.0 * half / (points - 1) as f64;
        let mut best = (f64::NEG_INFINITY, center.clone());
        let mut idx = vec![0usize; k];
        loop {
            let x: Vec<f64> = (0..k).map(|j| (center[j] - half + idx[j] as f64 * step).max(1e-12)).collect();
            let v = f(&x);
            if v > best.0 {
                best = (v, x);
            }
            let mut j = 0;
            while j < k {
                idx[j] += 1;
                if idx[j] < points {
                    break;
                }
                idx[j] = 0;
                j += 1;
            }
            if j == k {
                break;
            }
        }
        center = best.1;
        half = 2.0 * step;
    }
    center
}

pub fn breslow_oracle_gap() -> f64 {
    let three = vec![(1.0, true, 1.0), (2.0, true, 0.0), (3.0, false, 1.0)];
    let all_events = vec![(0.5, true, 0.2), (1.5, true, 0.9), (2.5, true, -0.4)];
    let cases: Vec<(Vec<Row>, Vec<f64>, f64)> = vec![
        (three.clone(), vec![1.0, 1.0, 1.0], 0.3),
        (three, vec![2.0, 0.0, 1.0], -0.7),
        (all_events.clone(), vec![1.0, 1.0, 1.0], 0.5),
        (all_events, vec![0.5, 1.5, 1.0], 1.2),
        (vec![(0.8, true, 1.0), (2.0, false, 0.0)], vec![1.0, 1.0], 0.0),
    ];
    let mut gap: f64 = 0.0;
    for (rows, w, theta) in cases {
        let eta = breslow_profile(&[theta], &rc(&rows), &WeightVector::new(w.clone()).unwrap()).unwrap();
        let times: Vec<f64> = rows
            .iter()
            .zip(&w)
            .filter(|(r, &wi)| r.1 && wi > 0.0)
            .map(|(r, _)| r.0)
            .collect();
        let best = grid_argmax(times.len(), 4.0, |j| rc_loglik(theta, &rows, &w, &times, j));
        for (t, b) in times.iter().zip(&best) {
            gap = gap.max((eta.jump_at(*t) - b).abs());
        }
    }
    gap
}

/// Brute-force maximizer over a 400-point lattice per coordinate under
/// `v_1 <= v_2 <= v_3`, for three rows with distinct sorted examination times.
pub fn cs_lattice_oracle(theta: f64, rows: &[Row], w: &[f64], lo: f64, hi: f64) -> [f64; 3] {
    let m = 400;
    let grid: Vec<f64> = (0..m).map(|k| lo + (hi - lo) * k as f64 / (m - 1) as f64).collect();
    let table: Vec<Vec<f64>> = rows
        .iter()
        .zip(w)
        .map(|(&(_, delta, z), &wi)| {
            let a = (theta * z).exp();
            grid.iter()
                .map(|&v| wi * if delta { (1.0 - (-a * v).exp()).ln() } else { -a * v })
                .collect()
        })
        .collect();
    let mut best = (f64::NEG_INFINITY, [0.0; 3]);
    for i in 0..m {
        for j in i..m {
            let head = table[0][i] + table[1][j];
            for k in j..m {
                let v = head + table[2][k];
                if v > best.0 {
                    best = (v, [grid[i], grid[j], grid[k]]);
                }
            }
        }
    }
    best.1
}

pub fn npmle_oracle_gap() -> f64 {
    let (lo, hi) = (1e-8, 4.0);
    let cases: Vec<(Vec<Row>, Vec<f64>, f64)> = vec![
        (vec![(0.5, true, 0.2), (1.0, false, 0.8), (1.5, true, 0.5)], vec![1.0, 1.0, 1.0], 0.5),
        (vec![(0.5, false, 0.2), (1.0, true, 0.8), (1.5, false, 0.5)], vec![1.0, 1.0, 1.0], -0.3),
        (vec![(0.3, true, 0.1), (0.9, true, 0.6), (1.7, false, 0.4)], vec![0.5, 2.0, 0.5], 1.0),
        (vec![(0.3, true, 0.1), (0.9, false, 0.6), (1.7, true, 0.4)], vec![1.2, 0.6, 1.2], 0.0),
    ];
    let mut gap: f64 = 0.0;
    for (rows, w, theta) in cases {
        let wv = WeightVector::new(w.clone()).unwrap();
        let eta = cs_profile_nuisance(&[theta], &cs(&rows), &wv, (lo, hi)).unwrap();
        let oracle = cs_lattice_oracle(theta, &rows, &w, lo, hi);
        for (r, o) in rows.iter().zip(oracle) {
            gap = gap.max((eta.eval(r.0) - o).abs());
        }
    }
    gap
}

/// Clamped B-spline basis on `[0, 1]` by the Cox-de Boor recursion.
pub fn bspline_basis(degree: usize, interior: usize, x: f64) -> Vec<f64> {
    let mut knots = vec![0.0; degree + 1];
    knots.extend((1..=interior).map(|j| j as f64 / (interior + 1) as f64));
    knots.extend(vec![1.0; degree + 1]);
    let spans = knots.len() - 1;
    // Degree-zero indicators, closing the last nonempty span at x = 1.
    let mut b: Vec<f64> = (0..spans)
        .map(|i| {
            let inside = knots[i] <= x && x < knots[i + 1];
            let at_end = x >= 1.0 && knots[i] < knots[i + 1] && knots[i + 1] == 1.0;
            f64::from(u8::from(inside || at_end))
        })
        .collect();
    for p in 1..=degree {
        b = (0..spans - p)
            .map(|i| {
                let left = if knots[i + p] > knots[i] {
                    (x - knots[i]) / (knots[i + p] - knots[i]) * b[i]
                } else {
                    0.0
                };
                let right = if knots[i + p + 1] > knots[i + 1] {
                    (knots[i + p + 1] - x) / (knots[i + p + 1] - knots[i + 1]) * b[i + 1]
                } else {
                    0.0
                };
                left + right
            })
            .collect();
    }
    b
}

/// Largest gap in theta, fitted values and the weighted mean of the fitted
/// curve against a weighted normal-equations solve.
pub fn partly_linear_oracle_gap() -> f64 {
    let cfg = ModelConfig::new(ModelKind::PartlyLinear);
    let mut gap: f64 = 0.0;
    for (n, seed, scheme) in [
        (120, 3, None),
        (200, 4, Some(WeightScheme::Bayesian)),
        (150, 5, Some(WeightScheme::Efron)),
    ] {
        let Dataset::PartlyLinear(data) = generate_data(&cfg, n, seed).unwrap() else { unreachable!() };
        let w = match scheme {
            None => WeightVector::unit(n),
            Some(s) => draw_weights(s, n, seed).unwrap(),
        };
        let settings = SplineSettings::default();
        let model = PartlyLinearModel::new(data.clone(), settings.clone()).unwrap();
        let (theta, f, _) = model.fit_joint(&w).unwrap();

        let obs = data.observations();
        let basis: Vec<Vec<f64>> = obs.iter().map(|o| bspline_basis(3, settings.knot_count(n), o.z)).collect();
        let size = basis[0].len();
        let total: f64 = w.as_slice().iter().sum();
        let means: Vec<f64> = (0..size)
            .map(|j| (0..n).map(|i| w[i] * basis[i][j]).sum::<f64>() / total)
            .collect();
        // Column 0 is W; then every centered basis function but the last,
        // since the centered basis sums to zero.
        let x = DMatrix::from_fn(n, size, |i, c| if c == 0 { obs[i].w } else { basis[i][c - 1] - means[c - 1] });
        let omega = DMatrix::from_diagonal(&DVector::from_iterator(n, w.as_slice().iter().copied()));
        let y = DVector::from_iterator(n, obs.iter().map(|o| o.y));
        let beta = (x.transpose() * &omega * &x).lu().solve(&(x.transpose() * &omega * &y)).unwrap();

        gap = gap.max((theta[0] - beta[0]).abs());
        let mut fitted_mean = 0.0;
        for i in 0..n {
            let fi: f64 = (1..size).map(|c| beta[c] * (basis[i][c - 1] - means[c - 1])).sum();
            let got = f.eval(obs[i].z);
            gap = gap.max((got - fi).abs());
            fitted_mean += w[i] * got / total;
        }
        gap = gap.max(fitted_mean.abs());
    }
    gap
}

/// Log partial likelihood with Breslow ties, written directly.
pub fn partial_loglik(theta: f64, rows: &[Row]) -> f64 {
    rows.iter()
        .filter(|r| r.1)
        .map(|&(y, _, z)| {
            let risk: f64 = rows.iter().filter(|r| r.0 >= y).map(|r| (theta * r.2).exp()).sum();
            theta * z - risk.ln()
        })
        .sum()
}

/// Fit against a theta grid of step 1e-4 on `[-5, 5]`.
pub fn theta_grid_oracle_gap() -> f64 {
    let datasets: [&[Row]; 3] = [
        &[(1.0, true, 1.0), (2.0, true, 0.0), (3.0, false, 1.0)],
        &[(1.0, true, 1.0), (2.0, true, 0.0), (3.0, false, 1.0), (1.5, true, 0.5), (2.5, false, 0.2)],
        &[(0.4, true, 0.9), (0.7, false, 0.1), (1.1, true, 0.3), (1.9, true, 0.6), (2.2, true, 0.0)],
    ];
    let opts = FitOptions::default().with_box(ThetaBox::symmetric(1, 5.0));
    let mut gap: f64 = 0.0;
    for rows in datasets {
        let got = fit(&CoxRcModel::new(rc(rows)), &WeightVector::unit(rows.len()), &opts).unwrap();
        let best = (0..=100_000)
            .map(|k| -5.0 + k as f64 * 1e-4)
            .map(|t| (partial_loglik(t, rows), t))
            .fold((f64::NEG_INFINITY, 0.0), |a, b| if b.0 > a.0 { b } else { a });
        gap = gap.max((got.theta_hat[0] - best.1).abs());
    }
    gap
}

pub struct KktSweep {
    pub monotone: bool,
    pub bounded: bool,
    pub max_residual: f64,
}

/// Current-status profile nuisance on `count` simulated datasets of size `n`.
pub fn npmle_kkt_sweep(count: u64, n: usize) -> KktSweep {
    let cfg = ModelConfig::new(ModelKind::CoxCs);
    let bounds = (cfg.eps_floor, cfg.m_bound());
    let mut out = KktSweep { monotone: true, bounded: true, max_residual: 0.0 };
    for seed in 0..count {
        let Dataset::CoxCs(data) = generate_data(&cfg, n, seed).unwrap() else { unreachable!() };
        let w = WeightVector::unit(n);
        let eta = cs_profile_nuisance(&cfg.theta0, &data, &w, bounds).unwrap();
        let v = eta.values();
        out.monotone &= v.windows(2).all(|p| p[0] <= p[1]);
        out.bounded &= v.iter().all(|&x| x >= bounds.0 && x <= bounds.1);
        out.max_residual = out.max_residual.max(cs_kkt_residual(&cfg.theta0, &eta, &data, &w, bounds));
    }
    out
}
