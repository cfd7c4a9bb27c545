//! Streaming Bayesian changepoint detection for seasonal multivariate time
//! series, robust to isolated outliers.
//!
//! The detector maintains a posterior distribution over "run lengths" -- the
//! number of observations since the most recent changepoint (Adams & MacKay,
//! 2007) -- under a multivariate linear regression observation model with a
//! matrix-normal inverse-Wishart conjugate prior. Seasonal and trend structure
//! enters through per-observation covariates, and the full cross-correlation
//! between signal components is modelled.
//!
//! Occasional wild observations (sensor glitches, undetected clouds in remote
//! sensing streams) would otherwise be flagged as changepoints. The
//! [`outlier`] module maintains a bank of shadow filters, each conditioned on
//! one recent observation being an outlier, and excises a confirmed outlier
//! from the live filter in place -- without replaying data and without
//! delaying detection.
//!
//! The crate is `no_std`-compatible (requires `alloc`); disable the default
//! `std` feature for embedded or sandboxed use. All math goes through
//! [`libm`] so results are bit-reproducible across platforms.
//!
//! # Modules
//!
//! - [`numerics`]: small dense symmetric/rectangular matrices, Cholesky,
//!   digamma, multivariate log-gamma.
//! - [`model`]: conjugate regression state model; sufficient statistics,
//!   posterior updates, log marginal and log predictive densities.
//! - [`engine`]: the run-length filter and windowed changepoint extraction.
//! - [`outlier`]: shadow-filter bank, outlier posterior, confirm-and-remove.
//! - [`priors`]: hyperparameter estimation from historical stable segments.
//! - [`simgen`]: scenario generator for the benchmark simulation study.
//! - [`eval`]: TP/FP/F-score/latency scoring of declared changepoints.
//! - [`sample`]: seeded samplers for the matrix distributions used here.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod engine;
pub mod error;
pub mod eval;
mod fm;
pub mod model;
pub mod numerics;
pub mod outlier;
pub mod priors;
pub mod sample;
pub mod simgen;

pub use engine::{ChangeEvent, Detector, DetectorConfig, RunLengthPosterior, StepResult};
pub use error::{Error, Result};
pub use model::{Hyperparameters, PosteriorParams, SufficientStats};
pub use numerics::{RectMatrix, SymMatrix};
pub use outlier::{
    Event, GuardedDetector, GuardedStepResult, OutlierConfig, OutlierEvent, OutlierPosterior,
    ShadowBank,
};
