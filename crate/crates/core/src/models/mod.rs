//! The three shipped semiparametric models: Cox regression with right
//! censoring, Cox regression with current-status data, and the partly linear
//! regression model. Each exposes its pointwise criterion, a weighted profile
//! estimator for the nuisance function, and a data generator.

use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::weights::WeightVector;

pub mod cox_cs;
pub mod cox_rc;
mod generate;
pub mod io;
pub mod isotonic;
pub mod partly_linear;
pub mod spline;
mod step;

pub use cox_cs::{cs_criterion, cs_profile_nuisance, CoxCsData, CoxCsModel, CoxCsObs, IcmOptions};
pub use cox_rc::{
    breslow_profile, cox_rc_criterion, cox_rc_profile_criterion, efficient_score_cox_rc,
    efficient_score_cox_rc_linear, CoxRcData, CoxRcModel, CoxRcObs,
};
pub use generate::{expected_event_fraction, generate_data};
pub use partly_linear::{partly_linear_fit, PartlyLinearData, PartlyLinearModel, PartlyLinearObs};
pub use spline::{SplineFunction, SplineSettings};
pub use step::StepFunction;

/// Euclidean parameter of interest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Theta(pub Vec<f64>);

impl Theta {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("theta must have at least one component"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("theta components must be finite"));
        }
        Ok(Theta(values))
    }

    pub fn scalar(v: f64) -> Self {
        Theta(vec![v])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for Theta {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Compact box containing the parameter space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl ThetaBox {
    pub fn symmetric(d: usize, half_width: f64) -> Self {
        ThetaBox {
            lower: vec![-half_width; d],
            upper: vec![half_width; d],
        }
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        if self.lower.len() != d || self.upper.len() != d {
            return Err(Error::invalid(format!("theta box must have dimension {d}")));
        }
        if self.lower.iter().zip(&self.upper).any(|(l, u)| !(l < u)) {
            return Err(Error::invalid("theta box needs lower < upper in every coordinate"));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(l, u)| 0.5 * (l + u)).collect()
    }

    pub fn contains(&self, theta: &[f64]) -> bool {
        theta
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(t, (l, u))| *l <= *t && *t <= *u)
    }

    pub fn project(&self, theta: &mut [f64]) {
        for (t, (l, u)) in theta.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            *t = t.clamp(*l, *u);
        }
    }
}

/// Fitted nuisance function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Nuisance {
    Step(StepFunction),
    Spline(SplineFunction),
}

impl Nuisance {
    pub fn as_step(&self) -> Option<&StepFunction> {
        match self {
            Nuisance::Step(s) => Some(s),
            Nuisance::Spline(_) => None,
        }
    }

    pub fn as_spline(&self) -> Option<&SplineFunction> {
        match self {
            Nuisance::Spline(s) => Some(s),
            Nuisance::Step(_) => None,
        }
    }
}

/// Closed-form joint optimum for models that do not need iterative search.
#[derive(Debug, Clone)]
pub struct ClosedForm {
    pub theta: Vec<f64>,
    pub nuisance: Nuisance,
    pub criterion: f64,
}

/// A model reduced to its profiled criterion `theta -> sup_eta P_n^W m(theta, eta)`.
///
/// The estimator and bootstrap layers only talk to models through this trait.
pub trait ProfileModel: Sync {
    /// Number of observations.
    fn n(&self) -> usize;

    fn dim(&self) -> usize;

    fn profile_criterion(&self, theta: &[f64], w: &WeightVector) -> Result<f64>;

    fn profile_nuisance(&self, theta: &[f64], w: &WeightVector) -> Result<Nuisance>;

    fn closed_form(&self, _w: &WeightVector) -> Option<Result<ClosedForm>> {
        None
    }

    /// Factor turning `(-H/n)^{-1}` into a variance estimate. Likelihood
    /// criteria use 1.
    fn curvature_scale(&self, _theta: &[f64]) -> Result<f64> {
        Ok(1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    CoxRc,
    CoxCs,
    PartlyLinear,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::CoxRc => "cox-rc",
            ModelKind::CoxCs => "cox-cs",
            ModelKind::PartlyLinear => "partly-linear",
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.pad(self.as_str())
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cox-rc" => Ok(ModelKind::CoxRc),
            "cox-cs" => Ok(ModelKind::CoxCs),
            "partly-linear" => Ok(ModelKind::PartlyLinear),
            other => Err(Error::invalid(format!("unknown model `{other}`"))),
        }
    }
}

/// Right-censoring law for simulated Cox data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Censoring {
    /// No censoring; every event is observed.
    None,
    /// Exponential censoring with this rate. Rate 0 means no censoring.
    Rate(f64),
    /// Exponential censoring with the rate solved for this expected censored fraction.
    Fraction(f64),
}

impl Default for Censoring {
    fn default() -> Self {
        Censoring::Fraction(0.25)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegressionTruth {
    /// `f0(z) = sin(2 pi z)`, which has mean zero under `Z ~ U[0, 1]`.
    #[default]
    Sine,
    Zero,
}

impl RegressionTruth {
    pub fn eval(self, z: f64) -> f64 {
        match self {
            RegressionTruth::Sine => (2.0 * std::f64::consts::PI * z).sin(),
            RegressionTruth::Zero => 0.0,
        }
    }
}

fn default_theta0() -> Vec<f64> {
    vec![0.5]
}

fn default_window() -> [f64; 2] {
    [0.1, 2.0]
}

fn default_eps_floor() -> f64 {
    1e-8
}

fn default_noise_sd() -> f64 {
    1.0
}

fn default_box_half_width() -> f64 {
    5.0
}

/// Simulation truth plus estimation settings for one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub kind: ModelKind,
    #[serde(default = "default_theta0")]
    pub theta0: Vec<f64>,
    #[serde(default)]
    pub censoring: Censoring,
    /// Examination-time support `[sigma, tau]` for current-status data.
    #[serde(default = "default_window")]
    pub exam_window: [f64; 2],
    /// Upper bound `M` on the current-status cumulative hazard. Defaults to
    /// twice the true cumulative hazard at the end of the examination window.
    #[serde(default)]
    pub m_bound: Option<f64>,
    #[serde(default = "default_eps_floor")]
    pub eps_floor: f64,
    #[serde(default)]
    pub f0: RegressionTruth,
    #[serde(default = "default_noise_sd")]
    pub noise_sd: f64,
    #[serde(default)]
    pub spline: SplineSettings,
    /// Half-width of the default symmetric theta box.
    #[serde(default = "default_box_half_width")]
    pub box_half_width: f64,
    #[serde(default)]
    pub theta_box: Option<ThetaBox>,
}

impl ModelConfig {
    pub fn new(kind: ModelKind) -> Self {
        ModelConfig {
            kind,
            theta0: default_theta0(),
            censoring: Censoring::default(),
            exam_window: default_window(),
            m_bound: None,
            eps_floor: default_eps_floor(),
            f0: RegressionTruth::default(),
            noise_sd: default_noise_sd(),
            spline: SplineSettings::default(),
            box_half_width: default_box_half_width(),
            theta_box: None,
        }
    }

    pub fn with_theta0(mut self, theta0: Vec<f64>) -> Self {
        self.theta0 = theta0;
        self
    }

    pub fn dim(&self) -> usize {
        self.theta0.len()
    }

    /// True cumulative baseline hazard, `eta0(t) = t`.
    pub fn eta0(&self, t: f64) -> f64 {
        t
    }

    pub fn m_bound(&self) -> f64 {
        self.m_bound
            .unwrap_or_else(|| 2.0 * self.eta0(self.exam_window[1]))
    }

    pub fn theta_box(&self) -> ThetaBox {
        self.theta_box
            .clone()
            .unwrap_or_else(|| ThetaBox::symmetric(self.dim(), self.box_half_width))
    }

    pub fn validate(&self) -> Result<()> {
        Theta::new(self.theta0.clone())?;
        let bx = self.theta_box();
        bx.validate(self.dim())?;
        if !bx.contains(&self.theta0) {
            return Err(Error::invalid("theta0 lies outside the theta box"));
        }
        match self.kind {
            ModelKind::CoxRc => match self.censoring {
                Censoring::Rate(r) if !(r >= 0.0 && r.is_finite()) => {
                    return Err(Error::invalid("censoring rate must be finite and >= 0"))
                }
                Censoring::Fraction(f) if !(0.0..1.0).contains(&f) => {
                    return Err(Error::invalid("censoring fraction must lie in [0, 1)"))
                }
                _ => {}
            },
            ModelKind::CoxCs => {
                let [sigma, tau] = self.exam_window;
                if !(0.0 < sigma && sigma < tau && tau.is_finite()) {
                    return Err(Error::invalid("examination window needs 0 < sigma < tau"));
                }
                let m = self.m_bound();
                if !(0.0 < self.eps_floor && self.eps_floor < m) {
                    return Err(Error::invalid("need 0 < eps_floor < M"));
                }
                if m <= self.eta0(tau) {
                    return Err(Error::invalid("M must exceed the true cumulative hazard on the window"));
                }
            }
            ModelKind::PartlyLinear => {
                if self.dim() != 1 {
                    return Err(Error::invalid("partly linear model has a scalar theta"));
                }
                if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
                    return Err(Error::invalid("noise_sd must be finite and >= 0"));
                }
                self.spline.validate()?;
            }
        }
        Ok(())
    }
}

/// Observations of a single model variant.
#[derive(Debug, Clone, PartialEq)]
pub enum Dataset {
    CoxRc(CoxRcData),
    CoxCs(CoxCsData),
    PartlyLinear(PartlyLinearData),
}

impl Dataset {
    pub fn kind(&self) -> ModelKind {
        match self {
            Dataset::CoxRc(_) => ModelKind::CoxRc,
            Dataset::CoxCs(_) => ModelKind::CoxCs,
            Dataset::PartlyLinear(_) => ModelKind::PartlyLinear,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Dataset::CoxRc(d) => d.len(),
            Dataset::CoxCs(d) => d.len(),
            Dataset::PartlyLinear(d) => d.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        match self {
            Dataset::CoxRc(d) => d.dim(),
            Dataset::CoxCs(d) => d.dim(),
            Dataset::PartlyLinear(_) => 1,
        }
    }
}

/// A dataset bound to the settings needed to profile it.
#[derive(Debug, Clone)]
pub enum Model {
    CoxRc(CoxRcModel),
    CoxCs(CoxCsModel),
    PartlyLinear(PartlyLinearModel),
}

impl Model {
    pub fn new(config: &ModelConfig, data: Dataset) -> Result<Self> {
        if config.kind != data.kind() {
            return Err(Error::invalid(format!(
                "dataset is {} but config declares {}",
                data.kind(),
                config.kind
            )));
        }
        Ok(match data {
            Dataset::CoxRc(d) => Model::CoxRc(CoxRcModel::new(d)),
            Dataset::CoxCs(d) => Model::CoxCs(CoxCsModel::new(
                d,
                (config.eps_floor, config.m_bound()),
                IcmOptions::default(),
            )?),
            Dataset::PartlyLinear(d) => {
                Model::PartlyLinear(PartlyLinearModel::new(d, config.spline.clone())?)
            }
        })
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            Model::CoxRc(_) => ModelKind::CoxRc,
            Model::CoxCs(_) => ModelKind::CoxCs,
            Model::PartlyLinear(_) => ModelKind::PartlyLinear,
        }
    }

    fn inner(&self) -> &dyn ProfileModel {
        match self {
            Model::CoxRc(m) => m,
            Model::CoxCs(m) => m,
            Model::PartlyLinear(m) => m,
        }
    }
}

impl ProfileModel for Model {
    fn n(&self) -> usize {
        self.inner().n()
    }

    fn dim(&self) -> usize {
        self.inner().dim()
    }

    fn profile_criterion(&self, theta: &[f64], w: &WeightVector) -> Result<f64> {
        self.inner().profile_criterion(theta, w)
    }

    fn profile_nuisance(&self, theta: &[f64], w: &WeightVector) -> Result<Nuisance> {
        self.inner().profile_nuisance(theta, w)
    }

    fn closed_form(&self, w: &WeightVector) -> Option<Result<ClosedForm>> {
        self.inner().closed_form(w)
    }

    fn curvature_scale(&self, theta: &[f64]) -> Result<f64> {
        self.inner().curvature_scale(theta)
    }
}

pub(crate) fn check_weights(n: usize, w: &WeightVector) -> Result<()> {
    if w.len() != n {
        return Err(Error::invalid(format!(
            "weight vector has length {} but dataset has {n} rows",
            w.len()
        )));
    }
    Ok(())
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
