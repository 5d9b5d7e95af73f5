//! Semiparametric M-estimation with exchangeable-weight bootstrap inference.
//!
//! A model is reduced to its profiled criterion ([`models::ProfileModel`]);
//! [`estimator::fit`] maximizes it under arbitrary exchangeable weights and
//! [`inference::run_bootstrap`] repeats that over weight draws to build
//! percentile, hybrid and studentized confidence sets. The [`simulate`]
//! module checks coverage, distributional imitation, nuisance rates and the
//! first-order expansion by Monte Carlo.

// `!(x > 0.0)` style checks are used on purpose so NaN falls into the reject branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod estimator;
pub mod inference;
pub mod models;
pub mod optimize;
pub mod report;
pub mod rng;
pub mod simulate;
pub mod weights;

pub use error::{Error, Result};
