//! Monte Carlo experiments: interval coverage, distributional imitation of
//! the bootstrap, nuisance convergence rates and the first-order expansion.
//!
//! Every experiment is a pure function of its [`ExperimentConfig`]. Each
//! replication draws from its own derived seed and results are aggregated by
//! replication index, so reports do not depend on thread scheduling.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::FitOptions;
use crate::inference::CiKind;
use crate::models::{ModelConfig, ThetaBox};
use crate::weights::WeightScheme;

mod consistency;
mod coverage;
mod expansion;
mod rates;

pub use consistency::{consistency_experiment, consistency_summary, ConsistencySummary};
pub use coverage::{
    coverage_experiment, coverage_experiment_with, standard_intervals, CoverageSummary, IntervalContext, KindCoverage,
};
pub use expansion::{expansion_experiment, expansion_remainder, ExpansionPoint, ExpansionSummary};
pub use rates::{expected_slope, log_log_slope, nuisance_error, rate_experiment, RatePoint, RateSummary, Slope};

fn default_replications() -> usize {
    100
}

fn default_bootstrap() -> usize {
    1000
}

fn default_alpha() -> f64 {
    0.05
}

fn default_gamma() -> f64 {
    0.5
}

fn default_kinds() -> Vec<CiKind> {
    CiKind::ALL.to_vec()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StudentizeMode {
    #[default]
    Shared,
    PerReplicate,
}

impl FromStr for StudentizeMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "shared" => Ok(StudentizeMode::Shared),
            "per-replicate" => Ok(StudentizeMode::PerReplicate),
            other => Err(Error::invalid(format!(
                "unknown studentization `{other}` (expected shared or per-replicate)"
            ))),
        }
    }
}

/// Monte Carlo design for one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    /// Sample size for single-n experiments.
    #[serde(default)]
    pub n: Option<usize>,
    /// Increasing sample sizes for rate and expansion experiments.
    #[serde(default)]
    pub n_grid: Option<Vec<usize>>,
    /// Monte Carlo replications `R`.
    #[serde(default = "default_replications", alias = "R")]
    pub replications: usize,
    /// Bootstrap replicates `B` per replication.
    #[serde(default = "default_bootstrap", alias = "B")]
    pub bootstrap: usize,
    #[serde(default)]
    pub scheme: WeightScheme,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub master_seed: u64,
    /// Expected nuisance rate exponent, recorded for comparison with slopes.
    #[serde(default = "default_gamma")]
    pub gamma_target: f64,
    #[serde(default = "default_kinds")]
    pub ci_kinds: Vec<CiKind>,
    #[serde(default)]
    pub studentize: StudentizeMode,
    #[serde(default)]
    pub fit: FitOptions,
}

impl ExperimentConfig {
    pub fn new(model: ModelConfig) -> Self {
        ExperimentConfig {
            model,
            n: None,
            n_grid: None,
            replications: default_replications(),
            bootstrap: default_bootstrap(),
            scheme: WeightScheme::default(),
            alpha: default_alpha(),
            master_seed: 0,
            gamma_target: default_gamma(),
            ci_kinds: default_kinds(),
            studentize: StudentizeMode::Shared,
            fit: FitOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.replications == 0 || self.bootstrap == 0 {
            return Err(Error::Config("replications and bootstrap must be at least 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if !(self.gamma_target > 0.25 && self.gamma_target <= 0.5) {
            return Err(Error::Config(format!(
                "gamma_target must lie in (1/4, 1/2], got {}",
                self.gamma_target
            )));
        }
        if let Some(grid) = &self.n_grid {
            if grid.is_empty() || grid[0] == 0 || grid.windows(2).any(|p| p[0] >= p[1]) {
                return Err(Error::Config("n_grid must be positive and strictly increasing".into()));
            }
        }
        if self.n == Some(0) {
            return Err(Error::Config("n must be positive".into()));
        }
        Ok(())
    }

    pub(crate) fn single_n(&self) -> Result<usize> {
        self.n
            .ok_or_else(|| Error::Config("this experiment needs a sample size `n`".into()))
    }

    pub(crate) fn grid(&self) -> Result<&[usize]> {
        self.n_grid
            .as_deref()
            .ok_or_else(|| Error::Config("this experiment needs an `n_grid`".into()))
    }

    /// Fit options with the model's theta box filled in.
    pub(crate) fn fit_options(&self) -> FitOptions {
        let mut fit = self.fit.clone();
        if fit.theta_box.is_none() {
            fit.theta_box = Some(self.model.theta_box());
        }
        fit
    }

    pub(crate) fn theta_box(&self) -> ThetaBox {
        self.fit.theta_box.clone().unwrap_or_else(|| self.model.theta_box())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Coverage,
    Consistency,
    Rates,
    Expansion,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::Coverage => "coverage",
            ExperimentKind::Consistency => "consistency",
            ExperimentKind::Rates => "rates",
            ExperimentKind::Expansion => "expansion",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "coverage" => Ok(ExperimentKind::Coverage),
            "consistency" => Ok(ExperimentKind::Consistency),
            "rates" => Ok(ExperimentKind::Rates),
            "expansion" => Ok(ExperimentKind::Expansion),
            other => Err(Error::Config(format!(
                "unknown experiment `{other}` (expected coverage, consistency, rates or expansion)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "experiment", rename_all = "kebab-case")]
pub enum Summary {
    Coverage(CoverageSummary),
    Consistency(ConsistencySummary),
    Rates(RateSummary),
    Expansion(ExpansionSummary),
}

/// Per-replication records, written as CSV on request.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl RawTable {
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(&self.columns)?;
        for row in &self.rows {
            wtr.write_record(row.iter().map(|v| format!("{v:?}")))?;
        }
        wtr.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulationReport {
    pub config: ExperimentConfig,
    pub summary: Summary,
    #[serde(skip)]
    pub raw: RawTable,
}

pub fn run_experiment(kind: ExperimentKind, cfg: &ExperimentConfig) -> Result<SimulationReport> {
    match kind {
        ExperimentKind::Coverage => coverage_experiment(cfg),
        ExperimentKind::Consistency => consistency_experiment(cfg),
        ExperimentKind::Rates => rate_experiment(cfg),
        ExperimentKind::Expansion => expansion_experiment(cfg),
    }
}

pub(crate) fn median(values: &[f64]) -> f64 {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    crate::inference::quantile_sorted(&v, 0.5)
}
