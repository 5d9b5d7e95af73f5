//! Clamped polynomial B-splines on `[0, 1]` with uniform interior knots.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn default_degree() -> usize {
    3
}

fn default_enabled() -> bool {
    true
}

/// Sieve settings for the regression nuisance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplineSettings {
    #[serde(default = "default_degree")]
    pub degree: usize,
    /// Interior knot count; `None` means `ceil(n^{1/5}) + 2`.
    #[serde(default)]
    pub interior_knots: Option<usize>,
    /// When false the nuisance is forced to zero (no basis columns).
    #[serde(default = "default_enabled")]
    pub enabled: bool,
}

impl Default for SplineSettings {
    fn default() -> Self {
        SplineSettings {
            degree: default_degree(),
            interior_knots: None,
            enabled: true,
        }
    }
}

impl SplineSettings {
    pub fn disabled() -> Self {
        SplineSettings {
            enabled: false,
            ..SplineSettings::default()
        }
    }

    pub fn knot_count(&self, n: usize) -> usize {
        self.interior_knots
            .unwrap_or_else(|| (n as f64).powf(0.2).ceil() as usize + 2)
    }

    pub fn validate(&self) -> Result<()> {
        if self.enabled && self.degree == 0 {
            return Err(Error::invalid("spline degree must be at least 1"));
        }
        Ok(())
    }
}

/// Clamped knot vector and basis evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct BSplineBasis {
    degree: usize,
    interior: Vec<f64>,
    knots: Vec<f64>,
}

impl BSplineBasis {
    pub fn uniform(degree: usize, interior_count: usize) -> Self {
        let interior: Vec<f64> = (1..=interior_count)
            .map(|k| k as f64 / (interior_count + 1) as f64)
            .collect();
        BSplineBasis::with_interior(degree, interior)
    }

    pub fn with_interior(degree: usize, interior: Vec<f64>) -> Self {
        let mut knots = vec![0.0; degree + 1];
        knots.extend_from_slice(&interior);
        knots.extend(std::iter::repeat_n(1.0, degree + 1));
        BSplineBasis {
            degree,
            interior,
            knots,
        }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn interior_knots(&self) -> &[f64] {
        &self.interior
    }

    pub fn size(&self) -> usize {
        self.interior.len() + self.degree + 1
    }

    fn span(&self, x: f64) -> usize {
        let last = self.size() - 1;
        if x >= self.knots[last + 1] {
            return last;
        }
        // largest i in [degree, last] with knots[i] <= x
        let i = self.knots[..=last + 1].partition_point(|&k| k <= x);
        (i.saturating_sub(1)).clamp(self.degree, last)
    }

    /// Writes all basis values at `x` (clamped to `[0, 1]`) into `out`.
    pub fn eval_into(&self, x: f64, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.size());
        out.fill(0.0);
        let x = x.clamp(0.0, 1.0);
        let p = self.degree;
        let span = self.span(x);
        let mut local = vec![0.0; p + 1];
        let mut left = vec![0.0; p + 1];
        let mut right = vec![0.0; p + 1];
        local[0] = 1.0;
        for j in 1..=p {
            left[j] = x - self.knots[span + 1 - j];
            right[j] = self.knots[span + j] - x;
            let mut saved = 0.0;
            for r in 0..j {
                let denom = right[r + 1] + left[j - r];
                let temp = if denom > 0.0 { local[r] / denom } else { 0.0 };
                local[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            local[j] = saved;
        }
        out[span - p..=span].copy_from_slice(&local);
    }

    pub fn eval(&self, x: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.size()];
        self.eval_into(x, &mut out);
        out
    }
}

/// Fitted regression nuisance `f(z) = sum_j c_j B_j(z) - offset`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplineFunction {
    pub degree: usize,
    pub interior_knots: Vec<f64>,
    pub coefficients: Vec<f64>,
    pub centering_offset: f64,
}

impl SplineFunction {
    pub fn zero() -> Self {
        SplineFunction {
            degree: 0,
            interior_knots: Vec::new(),
            coefficients: Vec::new(),
            centering_offset: 0.0,
        }
    }

    pub fn basis(&self) -> Option<BSplineBasis> {
        if self.coefficients.is_empty() {
            None
        } else {
            Some(BSplineBasis::with_interior(self.degree, self.interior_knots.clone()))
        }
    }

    pub fn eval(&self, z: f64) -> f64 {
        match self.basis() {
            None => -self.centering_offset,
            Some(b) => {
                let vals = b.eval(z);
                vals.iter().zip(&self.coefficients).map(|(b, c)| b * c).sum::<f64>() - self.centering_offset
            }
        }
    }

    /// Evaluates at many points, building the basis once.
    pub fn eval_many(&self, zs: &[f64]) -> Vec<f64> {
        match self.basis() {
            None => vec![-self.centering_offset; zs.len()],
            Some(b) => {
                let mut buf = vec![0.0; b.size()];
                zs.iter()
                    .map(|&z| {
                        b.eval_into(z, &mut buf);
                        buf.iter().zip(&self.coefficients).map(|(b, c)| b * c).sum::<f64>()
                            - self.centering_offset
                    })
                    .collect()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn knot_rule() {
        let s = SplineSettings::default();
        assert_eq!(s.knot_count(100), 5);
        assert_eq!(s.knot_count(200), 5);
        assert_eq!(s.knot_count(400), 6);
        assert_eq!(s.knot_count(1600), 7);
    }

    #[test]
    fn linear_basis_is_hat_functions() {
        let b = BSplineBasis::uniform(1, 1);
        assert_eq!(b.size(), 3);
        let v = b.eval(0.25);
        assert!((v[0] - 0.5).abs() < 1e-15 && (v[1] - 0.5).abs() < 1e-15 && v[2] == 0.0);
        assert_eq!(b.eval(1.0), vec![0.0, 0.0, 1.0]);
        assert_eq!(b.eval(0.0), vec![1.0, 0.0, 0.0]);
    }

    proptest! {
        #[test]
        fn partition_of_unity(x in 0.0f64..=1.0, k in 0usize..8, p in 1usize..4) {
            let b = BSplineBasis::uniform(p, k);
            let v = b.eval(x);
            prop_assert!(v.iter().all(|&e| e >= -1e-14));
            prop_assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn cubic_reproduces_polynomials() {
        // Marsden: a clamped cubic basis spans cubics, so a least-squares
        // fit to x^3 sampled densely is exact.
        let b = BSplineBasis::uniform(3, 4);
        let xs: Vec<f64> = (0..200).map(|i| i as f64 / 199.0).collect();
        let rows: Vec<Vec<f64>> = xs.iter().map(|&x| b.eval(x)).collect();
        let m = nalgebra::DMatrix::from_fn(xs.len(), b.size(), |i, j| rows[i][j]);
        let y = nalgebra::DVector::from_iterator(xs.len(), xs.iter().map(|x| x * x * x));
        let coef = m.clone().svd(true, true).solve(&y, 1e-12).unwrap();
        let resid = (&m * coef - y).amax();
        assert!(resid < 1e-10);
    }
}
