//! Partly linear regression `Y = theta W + f(Z) + xi` fitted by weighted least
//! squares over a fixed cubic-spline sieve for `f`, with `f` centered to
//! have weighted mean zero over the observed `Z`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::models::spline::{BSplineBasis, SplineFunction, SplineSettings};
use crate::models::{check_weights, ClosedForm, Nuisance, ProfileModel, Theta};
use crate::weights::WeightVector;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartlyLinearObs {
    pub y: f64,
    pub w: f64,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartlyLinearData {
    obs: Vec<PartlyLinearObs>,
}

impl PartlyLinearData {
    pub fn new(obs: Vec<PartlyLinearObs>) -> Result<Self> {
        if obs.is_empty() {
            return Err(Error::invalid("empty dataset"));
        }
        for (i, o) in obs.iter().enumerate() {
            if !(o.y.is_finite() && o.w.is_finite()) {
                return Err(Error::invalid(format!("row {i}: y and w must be finite")));
            }
            if !(0.0..=1.0).contains(&o.z) {
                return Err(Error::invalid(format!("row {i}: z must lie in [0, 1]")));
            }
        }
        Ok(PartlyLinearData { obs })
    }

    pub fn len(&self) -> usize {
        self.obs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.obs.is_empty()
    }

    pub fn observations(&self) -> &[PartlyLinearObs] {
        &self.obs
    }
}

/// Result of one weighted least-squares solve.
struct LsFit {
    coef: Vec<f64>,
    /// Weighted column means used for centering the spline columns.
    means: Vec<f64>,
    criterion: f64,
}

#[derive(Debug, Clone)]
pub struct PartlyLinearModel {
    data: PartlyLinearData,
    settings: SplineSettings,
    basis: Option<BSplineBasis>,
    /// Basis values at each `z_i`, row-major `n x size`.
    rows: Vec<f64>,
}

impl PartlyLinearModel {
    pub fn new(data: PartlyLinearData, settings: SplineSettings) -> Result<Self> {
        settings.validate()?;
        let basis = settings
            .enabled
            .then(|| BSplineBasis::uniform(settings.degree, settings.knot_count(data.len())));
        let rows = match &basis {
            None => Vec::new(),
            Some(b) => {
                let k = b.size();
                let mut rows = vec![0.0; data.len() * k];
                for (chunk, o) in rows.chunks_mut(k).zip(&data.obs) {
                    b.eval_into(o.z, chunk);
                }
                rows
            }
        };
        Ok(PartlyLinearModel {
            data,
            settings,
            basis,
            rows,
        })
    }

    pub fn data(&self) -> &PartlyLinearData {
        &self.data
    }

    pub fn settings(&self) -> &SplineSettings {
        &self.settings
    }

    /// Spline columns kept in the design. One B-spline is dropped because the
    /// centered basis sums to zero.
    fn spline_columns(&self) -> usize {
        self.basis.as_ref().map_or(0, |b| b.size() - 1)
    }

    /// Number of columns in the joint design (`W` plus centered spline columns).
    pub fn design_columns(&self) -> usize {
        1 + self.spline_columns()
    }

    fn basis_value(&self, i: usize, j: usize) -> f64 {
        let k = self.basis.as_ref().map_or(0, |b| b.size());
        self.rows[i * k + j]
    }

    /// Weighted LS of `response` on the design (optionally including `W`).
    fn solve(&self, response: &[f64], weights: &[f64], include_w: bool) -> Result<LsFit> {
        let active: Vec<usize> = (0..self.data.len()).filter(|&i| weights[i] > 0.0).collect();
        let total: f64 = active.iter().map(|&i| weights[i]).sum();
        let sc = self.spline_columns();
        let means: Vec<f64> = (0..sc)
            .map(|j| active.iter().map(|&i| weights[i] * self.basis_value(i, j)).sum::<f64>() / total)
            .collect();
        let offset = usize::from(include_w);
        let p = offset + sc;
        if p == 0 {
            let criterion = -active.iter().map(|&i| weights[i] * response[i] * response[i]).sum::<f64>();
            return Ok(LsFit {
                coef: Vec::new(),
                means,
                criterion,
            });
        }
        if active.len() < p {
            return Err(Error::SingularDesign {
                column: column_name(active.len().min(p - 1), include_w),
            });
        }
        let x = DMatrix::from_fn(active.len(), p, |r, c| {
            let i = active[r];
            let sw = weights[i].sqrt();
            let v = if include_w && c == 0 {
                self.data.obs[i].w
            } else {
                let j = c - offset;
                self.basis_value(i, j) - means[j]
            };
            sw * v
        });
        let yv = DVector::from_iterator(active.len(), active.iter().map(|&i| weights[i].sqrt() * response[i]));
        let scale = x.column_iter().map(|c| c.norm()).fold(0.0, f64::max).max(1e-300);
        let qr = x.qr();
        let r = qr.r();
        for c in 0..p {
            if r[(c, c)].abs() <= 1e-10 * scale {
                return Err(Error::SingularDesign {
                    column: column_name(c, include_w),
                });
            }
        }
        let mut qty = yv;
        qr.q_tr_mul(&mut qty);
        let coef = r
            .solve_upper_triangular(&qty.rows(0, p).into_owned())
            .ok_or_else(|| Error::SingularDesign {
                column: column_name(p - 1, include_w),
            })?;
        let criterion = -qty.rows(p, qty.len() - p).norm_squared();
        Ok(LsFit {
            coef: coef.iter().copied().collect(),
            means,
            criterion,
        })
    }

    fn spline_from(&self, coef: &[f64], means: &[f64]) -> SplineFunction {
        match &self.basis {
            None => SplineFunction::zero(),
            Some(b) => {
                let mut coefficients = coef.to_vec();
                coefficients.push(0.0);
                let centering_offset = coef.iter().zip(means).map(|(c, m)| c * m).sum();
                SplineFunction {
                    degree: b.degree(),
                    interior_knots: b.interior_knots().to_vec(),
                    coefficients,
                    centering_offset,
                }
            }
        }
    }

    fn partial_response(&self, theta: f64) -> Vec<f64> {
        self.data.obs.iter().map(|o| o.y - theta * o.w).collect()
    }

    /// Joint weighted least-squares fit of `(theta, f)`.
    pub fn fit_joint(&self, weights: &WeightVector) -> Result<(Theta, SplineFunction, f64)> {
        check_weights(self.data.len(), weights)?;
        self.fit_joint_raw(weights.as_slice())
    }

    /// Joint fit with arbitrary nonnegative weights (not normalized to sum to n).
    pub(crate) fn fit_joint_raw(&self, weights: &[f64]) -> Result<(Theta, SplineFunction, f64)> {
        let ys: Vec<f64> = self.data.obs.iter().map(|o| o.y).collect();
        let fit = self.solve(&ys, weights, true)?;
        let spline = self.spline_from(&fit.coef[1..], &fit.means);
        Ok((Theta::scalar(fit.coef[0]), spline, fit.criterion))
    }

    /// Weighted residuals `y_i - theta w_i - f(z_i)`.
    pub fn residuals(&self, theta: f64, f: &SplineFunction) -> Vec<f64> {
        let zs: Vec<f64> = self.data.obs.iter().map(|o| o.z).collect();
        let fz = f.eval_many(&zs);
        self.data
            .obs
            .iter()
            .zip(fz)
            .map(|(o, fv)| o.y - theta * o.w - fv)
            .collect()
    }
}

fn column_name(index: usize, include_w: bool) -> String {
    match (include_w, index) {
        (true, 0) => "w".to_string(),
        (true, j) => format!("spline[{}]", j - 1),
        (false, j) => format!("spline[{j}]"),
    }
}

/// Joint weighted least-squares estimate of `(theta, f)` over the spline sieve.
pub fn partly_linear_fit(
    data: &PartlyLinearData,
    w: &WeightVector,
    spline: &SplineSettings,
) -> Result<(Theta, SplineFunction)> {
    let model = PartlyLinearModel::new(data.clone(), spline.clone())?;
    model.fit_joint(w).map(|(theta, f, _)| (theta, f))
}

impl ProfileModel for PartlyLinearModel {
    fn n(&self) -> usize {
        self.data.len()
    }

    fn dim(&self) -> usize {
        1
    }

    fn profile_criterion(&self, theta: &[f64], w: &WeightVector) -> Result<f64> {
        check_weights(self.data.len(), w)?;
        Ok(self.solve(&self.partial_response(theta[0]), w.as_slice(), false)?.criterion)
    }

    fn profile_nuisance(&self, theta: &[f64], w: &WeightVector) -> Result<Nuisance> {
        check_weights(self.data.len(), w)?;
        let fit = self.solve(&self.partial_response(theta[0]), w.as_slice(), false)?;
        Ok(Nuisance::Spline(self.spline_from(&fit.coef, &fit.means)))
    }

    fn closed_form(&self, w: &WeightVector) -> Option<Result<ClosedForm>> {
        Some(self.fit_joint(w).map(|(theta, f, criterion)| ClosedForm {
            theta: theta.into_inner(),
            nuisance: Nuisance::Spline(f),
            criterion,
        }))
    }

    /// The least-squares criterion is `2 sigma^2` times a Gaussian
    /// log-likelihood, so the raw curvature inverse is rescaled by
    /// `2 sigma_hat^2` with `sigma_hat^2 = RSS / (n - p)`.
    fn curvature_scale(&self, theta: &[f64]) -> Result<f64> {
        let unit = WeightVector::unit(self.data.len());
        let rss = -self.profile_criterion(theta, &unit)?;
        let dof = self.data.len().saturating_sub(self.design_columns());
        if dof == 0 {
            return Err(Error::invalid("no residual degrees of freedom for the variance"));
        }
        Ok(2.0 * rss / dof as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn noiseless(n: usize) -> PartlyLinearData {
        PartlyLinearData::new(
            (0..n)
                .map(|i| {
                    let w = ((i * 37) % n) as f64 / n as f64;
                    let z = (i as f64 + 0.5) / n as f64;
                    PartlyLinearObs { y: 0.7 * w, w, z }
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn noiseless_recovers_slope() {
        let data = noiseless(60);
        let (theta, f) = partly_linear_fit(&data, &WeightVector::unit(60), &SplineSettings::default()).unwrap();
        assert!((theta[0] - 0.7).abs() < 1e-10);
        assert!(f.eval(0.3).abs() < 1e-9);
    }

    #[test]
    fn doubling_weights_is_invariant() {
        let data = PartlyLinearData::new(
            (0..80)
                .map(|i| {
                    let w = ((i * 13) % 80) as f64 / 80.0;
                    let z = ((i * 29) % 80) as f64 / 80.0;
                    PartlyLinearObs {
                        y: 0.5 * w + (6.0 * z).sin() + 0.1 * ((i % 7) as f64 - 3.0),
                        w,
                        z,
                    }
                })
                .collect(),
        )
        .unwrap();
        let mut raw: Vec<f64> = (0..80).map(|i| 0.5 + (i % 3) as f64).collect();
        let unit_sum: f64 = raw.iter().sum();
        raw.iter_mut().for_each(|v| *v *= 80.0 / unit_sum);
        let w1 = WeightVector::new(raw.clone()).unwrap();
        let model = PartlyLinearModel::new(data, SplineSettings::default()).unwrap();
        let (t1, f1, _) = model.fit_joint(&w1).unwrap();
        let doubled: Vec<f64> = raw.iter().map(|v| 2.0 * v).collect();
        let (t2, f2, _) = model.fit_joint_raw(&doubled).unwrap();
        assert!((t1[0] - t2[0]).abs() < 1e-12);
        assert!((f1.eval(0.4) - f2.eval(0.4)).abs() < 1e-10);
    }

    #[test]
    fn duplicated_design_is_singular() {
        let data = PartlyLinearData::new(
            (0..30)
                .map(|i| PartlyLinearObs {
                    y: i as f64,
                    w: 1.0,
                    z: 0.5,
                })
                .collect(),
        )
        .unwrap();
        let err = partly_linear_fit(&data, &WeightVector::unit(30), &SplineSettings::default()).unwrap_err();
        match err {
            Error::SingularDesign { column } => assert!(column.starts_with("spline")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn fitted_nuisance_is_centered() {
        let data = PartlyLinearData::new(
            (0..50)
                .map(|i| {
                    let z = (i as f64 + 0.25) / 50.0;
                    PartlyLinearObs {
                        y: 2.0 + z * z,
                        w: ((i * 7) % 50) as f64 / 50.0,
                        z,
                    }
                })
                .collect(),
        )
        .unwrap();
        let (_, f) = partly_linear_fit(&data, &WeightVector::unit(50), &SplineSettings::default()).unwrap();
        let mean: f64 = data.observations().iter().map(|o| f.eval(o.z)).sum::<f64>() / 50.0;
        assert!(mean.abs() < 1e-10);
    }
}
