//! Box-constrained quasi-Newton ascent with central-difference gradients.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::models::ThetaBox;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub iteration: usize,
    pub value: f64,
    pub gradient_norm: f64,
    pub step: f64,
}

#[derive(Debug, Clone)]
pub struct Ascent {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
    pub gradient_norm: f64,
    pub trace: Vec<TracePoint>,
}

#[derive(Debug, Clone, Copy)]
pub struct AscentOptions {
    /// Converged when the projected gradient norm is at most `tolerance * (1 + |f|)`.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Relative finite-difference step: `h_j = step * (1 + |x_j|)`.
    pub gradient_step: f64,
}

impl Default for AscentOptions {
    fn default() -> Self {
        AscentOptions {
            tolerance: 1e-6,
            max_iterations: 200,
            gradient_step: 1e-5,
        }
    }
}

pub fn central_gradient<F>(f: &F, x: &[f64], rel_step: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|j| {
            let h = rel_step * (1.0 + x[j].abs());
            probe[j] = x[j] + h;
            let up = f(&probe)?;
            probe[j] = x[j] - h;
            let down = f(&probe)?;
            probe[j] = x[j];
            Ok((up - down) / (2.0 * h))
        })
        .collect()
}

/// Gradient with components that push against an active bound zeroed.
fn projected(g: &[f64], x: &[f64], bx: &ThetaBox) -> Vec<f64> {
    g.iter()
        .enumerate()
        .map(|(j, &gj)| {
            let at_upper = x[j] >= bx.upper[j] && gj > 0.0;
            let at_lower = x[j] <= bx.lower[j] && gj < 0.0;
            if at_upper || at_lower {
                0.0
            } else {
                gj
            }
        })
        .collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Maximizes `f` over the box starting at `x0`.
///
/// Evaluation failures at trial points are treated as `-inf` and trigger
/// backtracking; failures at accepted points propagate.
pub fn maximize<F>(f: &F, x0: &[f64], bx: &ThetaBox, opts: &AscentOptions) -> Result<Ascent>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    let d = x0.len();
    let mut x = x0.to_vec();
    bx.project(&mut x);
    let mut fx = f(&x)?;
    let mut g = central_gradient(f, &x, opts.gradient_step)?;
    let mut hinv = identity(d);
    let mut first_update = true;
    let mut trace = Vec::new();
    let mut iterations = 0;

    loop {
        let pg = projected(&g, &x, bx);
        let gnorm = norm(&pg);
        trace.push(TracePoint {
            iteration: iterations,
            value: fx,
            gradient_norm: gnorm,
            step: trace.last().map_or(0.0, |_| 1.0),
        });
        if gnorm <= opts.tolerance * (1.0 + fx.abs()) {
            return Ok(Ascent {
                x,
                value: fx,
                iterations,
                converged: true,
                gradient_norm: gnorm,
                trace,
            });
        }
        if iterations >= opts.max_iterations {
            return Ok(Ascent {
                x,
                value: fx,
                iterations,
                converged: false,
                gradient_norm: gnorm,
                trace,
            });
        }
        iterations += 1;

        let mut direction = mat_vec(&hinv, &pg);
        for j in 0..d {
            if (x[j] >= bx.upper[j] && direction[j] > 0.0) || (x[j] <= bx.lower[j] && direction[j] < 0.0) {
                direction[j] = 0.0;
            }
        }
        if dot(&direction, &pg) <= 0.0 {
            hinv = identity(d);
            first_update = true;
            direction = pg.clone();
        }
        if first_update {
            // Unscaled first step: cap its length relative to the box.
            let width = bx
                .lower
                .iter()
                .zip(&bx.upper)
                .map(|(l, u)| u - l)
                .fold(f64::INFINITY, f64::min);
            let len = norm(&direction);
            let cap = 0.1 * width;
            if len > cap {
                direction.iter_mut().for_each(|v| *v *= cap / len);
            }
        }

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let mut trial: Vec<f64> = x.iter().zip(&direction).map(|(xi, di)| xi + step * di).collect();
            bx.project(&mut trial);
            let moved: Vec<f64> = trial.iter().zip(&x).map(|(t, xi)| t - xi).collect();
            if norm(&moved) == 0.0 {
                break;
            }
            if let Ok(ft) = f(&trial) {
                if ft.is_finite() && ft >= fx + 1e-4 * dot(&g, &moved) {
                    accepted = Some((trial, ft, moved));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((x_new, f_new, s)) = accepted else {
            if first_update {
                // Steepest ascent could not make progress; report where we are.
                return Ok(Ascent {
                    x,
                    value: fx,
                    iterations,
                    converged: false,
                    gradient_norm: gnorm,
                    trace,
                });
            }
            hinv = identity(d);
            first_update = true;
            continue;
        };
        let g_new = central_gradient(f, &x_new, opts.gradient_step)?;
        // BFGS on -f: y = -(g_new - g).
        let y: Vec<f64> = g.iter().zip(&g_new).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * norm(&s) * norm(&y) {
            if first_update {
                let scale = sy / dot(&y, &y);
                hinv = identity(d);
                hinv.iter_mut().for_each(|row| row.iter_mut().for_each(|v| *v *= scale));
                first_update = false;
            }
            bfgs_update(&mut hinv, &s, &y, sy);
        }
        x = x_new;
        fx = f_new;
        g = g_new;
        if let Some(last) = trace.last_mut() {
            last.step = step;
        }
    }
}

fn identity(d: usize) -> Vec<Vec<f64>> {
    (0..d)
        .map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}

fn mat_vec(m: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    m.iter().map(|row| dot(row, v)).collect()
}

fn bfgs_update(h: &mut [Vec<f64>], s: &[f64], y: &[f64], sy: f64) {
    let d = s.len();
    let rho = 1.0 / sy;
    let hy = mat_vec(h, y);
    let yhy = dot(y, &hy);
    for i in 0..d {
        for j in 0..d {
            h[i][j] += -rho * (s[i] * hy[j] + hy[i] * s[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
        }
    }
}
