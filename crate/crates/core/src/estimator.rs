//! Weighted M-estimation: maximize the profiled criterion over theta and
//! estimate the asymptotic variance from its curvature.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{Nuisance, ProfileModel, Theta, ThetaBox};
use crate::optimize::{maximize, AscentOptions, TracePoint};
use crate::rng::{derive_tagged, rng_from_seed};
use crate::weights::WeightVector;

fn default_tolerance() -> f64 {
    1e-6
}

fn default_max_iterations() -> usize {
    200
}

/// Optimizer settings shared by every fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitOptions {
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    /// Box for theta; `None` uses the model configuration's box.
    #[serde(default)]
    pub theta_box: Option<ThetaBox>,
    /// Extra uniform random starts in addition to the box center.
    #[serde(default)]
    pub starts: usize,
    #[serde(default)]
    pub start_seed: u64,
    /// Hessian step; `None` means `n^{-1/2} / 2`.
    #[serde(default)]
    pub hessian_step: Option<f64>,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            tolerance: default_tolerance(),
            max_iterations: default_max_iterations(),
            theta_box: None,
            starts: 0,
            start_seed: 0,
            hessian_step: None,
        }
    }
}

impl FitOptions {
    pub fn with_box(mut self, bx: ThetaBox) -> Self {
        self.theta_box = Some(bx);
        self
    }

    fn resolved_box(&self, d: usize) -> Result<ThetaBox> {
        let bx = self.theta_box.clone().unwrap_or_else(|| ThetaBox::symmetric(d, 5.0));
        bx.validate(d)?;
        Ok(bx)
    }

    fn ascent(&self) -> AscentOptions {
        AscentOptions {
            tolerance: self.tolerance,
            max_iterations: self.max_iterations,
            ..AscentOptions::default()
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitResult {
    pub theta_hat: Theta,
    pub eta_hat: Nuisance,
    pub criterion: f64,
    pub iterations: usize,
    pub converged: bool,
    pub gradient_norm: f64,
    #[serde(skip)]
    pub trace: Vec<TracePoint>,
}

/// Maximizes `theta -> sup_eta P_n^W m(theta, eta)` over the box.
///
/// Models with a closed-form joint optimum skip the iterative search.
pub fn fit<M: ProfileModel + ?Sized>(model: &M, w: &WeightVector, opts: &FitOptions) -> Result<FitResult> {
    if w.len() != model.n() {
        return Err(Error::invalid(format!(
            "weight vector has length {} but the data has {} rows",
            w.len(),
            model.n()
        )));
    }
    let d = model.dim();
    let bx = opts.resolved_box(d)?;
    if let Some(closed) = model.closed_form(w) {
        let closed = closed?;
        let mut theta = closed.theta.clone();
        if bx.contains(&theta) {
            return Ok(FitResult {
                theta_hat: Theta(theta),
                eta_hat: closed.nuisance,
                criterion: closed.criterion,
                iterations: 0,
                converged: true,
                gradient_norm: 0.0,
                trace: Vec::new(),
            });
        }
        // Unconstrained optimum outside the box: fall back to search from the
        // projected point.
        bx.project(&mut theta);
    }

    let objective = |theta: &[f64]| model.profile_criterion(theta, w);
    let mut starts = vec![bx.center()];
    if opts.starts > 0 {
        let mut rng = rng_from_seed(derive_tagged(opts.start_seed, "fit-starts", 0));
        for _ in 0..opts.starts {
            starts.push(
                bx.lower
                    .iter()
                    .zip(&bx.upper)
                    .map(|(l, u)| l + (u - l) * rng.random::<f64>())
                    .collect(),
            );
        }
    }
    let mut best: Option<crate::optimize::Ascent> = None;
    let mut first_error = None;
    for x0 in &starts {
        match maximize(&objective, x0, &bx, &opts.ascent()) {
            Ok(run) => {
                let better = best.as_ref().is_none_or(|b| {
                    (run.converged && !b.converged) || (run.converged == b.converged && run.value > b.value)
                });
                if better {
                    best = Some(run);
                }
            }
            Err(e) => {
                first_error.get_or_insert(e);
            }
        }
    }
    let Some(run) = best else {
        return Err(first_error.unwrap_or_else(|| Error::Optimization("no start succeeded".into())));
    };
    let eta_hat = model.profile_nuisance(&run.x, w)?;
    Ok(FitResult {
        theta_hat: Theta(run.x),
        eta_hat,
        criterion: run.value,
        iterations: run.iterations,
        converged: run.converged,
        gradient_norm: run.gradient_norm,
        trace: run.trace,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VarianceMethod {
    ProfileCurvature,
}

/// Estimated asymptotic covariance of `sqrt(n) (theta_hat - theta_0)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaEstimate {
    pub matrix: Vec<Vec<f64>>,
    pub method: VarianceMethod,
}

impl SigmaEstimate {
    pub fn dim(&self) -> usize {
        self.matrix.len()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|j| self.matrix[j][j]).collect()
    }

    pub fn is_positive_definite(&self) -> bool {
        let d = self.dim();
        DMatrix::from_fn(d, d, |i, j| self.matrix[i][j]).cholesky().is_some()
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        let d = self.dim();
        DMatrix::from_fn(d, d, |i, j| self.matrix[i][j])
    }
}

/// Central second-difference Hessian of the unit-weight profiled criterion.
pub fn profile_curvature<M: ProfileModel + ?Sized>(
    model: &M,
    theta_hat: &[f64],
    opts: &FitOptions,
) -> Result<SigmaEstimate> {
    profile_curvature_weighted(model, &WeightVector::unit(model.n()), theta_hat, opts)
}

/// Same as [`profile_curvature`] for an arbitrary weight vector; used for
/// per-replicate studentization.
pub fn profile_curvature_weighted<M: ProfileModel + ?Sized>(
    model: &M,
    w: &WeightVector,
    theta_hat: &[f64],
    opts: &FitOptions,
) -> Result<SigmaEstimate> {
    let n = model.n();
    let d = theta_hat.len();
    if d != model.dim() {
        return Err(Error::invalid(format!("theta has dimension {d}, model expects {}", model.dim())));
    }
    let h = opts.hessian_step.unwrap_or(0.5 / (n as f64).sqrt());
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::invalid("hessian step must be positive"));
    }
    let f = |shift: &[(usize, f64)]| -> Result<f64> {
        let mut t = theta_hat.to_vec();
        for &(j, s) in shift {
            t[j] += s;
        }
        let v = model.profile_criterion(&t, w)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Curvature(format!("criterion is not finite at {t:?}")))
        }
    };
    let f0 = f(&[])?;
    let mut hess = DMatrix::zeros(d, d);
    for i in 0..d {
        hess[(i, i)] = (f(&[(i, h)])? - 2.0 * f0 + f(&[(i, -h)])?) / (h * h);
        for j in 0..i {
            let v = (f(&[(i, h), (j, h)])? - f(&[(i, h), (j, -h)])? - f(&[(i, -h), (j, h)])?
                + f(&[(i, -h), (j, -h)])?)
                / (4.0 * h * h);
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    let info = -hess / n as f64;
    let Some(chol) = info.clone().cholesky() else {
        return Err(Error::Curvature(format!(
            "observed profile information {:?} is not positive definite",
            info.as_slice()
        )));
    };
    let scale = model.curvature_scale(theta_hat)?;
    let inv = chol.inverse() * scale;
    let sym = (&inv + inv.transpose()) * 0.5;
    Ok(SigmaEstimate {
        matrix: (0..d).map(|i| (0..d).map(|j| sym[(i, j)]).collect()).collect(),
        method: VarianceMethod::ProfileCurvature,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `-n (theta - a)^2 / 2`, summed with the weights.
    struct Quadratic {
        n: usize,
        a: f64,
    }

    impl ProfileModel for Quadratic {
        fn n(&self) -> usize {
            self.n
        }
        fn dim(&self) -> usize {
            1
        }
        fn profile_criterion(&self, theta: &[f64], w: &WeightVector) -> Result<f64> {
            let total: f64 = w.as_slice().iter().sum();
            Ok(-total * (theta[0] - self.a).powi(2) / 2.0)
        }
        fn profile_nuisance(&self, _: &[f64], _: &WeightVector) -> Result<Nuisance> {
            Ok(Nuisance::Spline(crate::models::SplineFunction::zero()))
        }
    }

    #[test]
    fn quadratic_curvature_is_one() {
        let m = Quadratic { n: 400, a: 0.3 };
        let s = profile_curvature(&m, &[0.3], &FitOptions::default()).unwrap();
        assert!((s.matrix[0][0] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn quadratic_fit_hits_center() {
        let m = Quadratic { n: 50, a: -1.25 };
        let r = fit(&m, &WeightVector::unit(50), &FitOptions::default()).unwrap();
        assert!(r.converged);
        assert!((r.theta_hat[0] + 1.25).abs() < 1e-6);
    }

    #[test]
    fn flat_criterion_is_curvature_error() {
        struct Flat;
        impl ProfileModel for Flat {
            fn n(&self) -> usize {
                10
            }
            fn dim(&self) -> usize {
                1
            }
            fn profile_criterion(&self, t: &[f64], _: &WeightVector) -> Result<f64> {
                Ok(t[0] * t[0])
            }
            fn profile_nuisance(&self, _: &[f64], _: &WeightVector) -> Result<Nuisance> {
                unreachable!()
            }
        }
        assert!(matches!(
            profile_curvature(&Flat, &[0.0], &FitOptions::default()),
            Err(Error::Curvature(_))
        ));
    }

    #[test]
    fn weight_length_mismatch() {
        let m = Quadratic { n: 5, a: 0.0 };
        assert!(fit(&m, &WeightVector::unit(4), &FitOptions::default()).is_err());
    }
}
