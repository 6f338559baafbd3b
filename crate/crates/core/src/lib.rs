//! Promotion-time (Poisson-Weibull) cure-rate model for the recovery process
//! of non-performing loans.
//!
//! A defaulted contract carries an unobserved number `M ~ Poisson(theta)` of
//! latent causes that push it towards full recovery. Each cause has a
//! Weibull-distributed latent time and recovery happens at the earliest one.
//! Contracts with `M = 0` are never recovered, so the population survival
//! (probability of *non*-recovery) levels off at the cure fraction
//! `exp(-theta)`.
//!
//! The crate is organised bottom-up:
//!
//! - [`distributions`]: Weibull and Poisson primitives.
//! - [`model`]: population survival, density, hazard and censored log-likelihood.
//! - [`optim`]: interchangeable minimizers behind a name-keyed registry.
//! - [`estimation`]: maximum-likelihood fits, stratified fits, standard errors.
//! - [`portfolio`]: CSV ingestion, segmentation and summary tables.
//! - [`simulation`]: generative sampler used as an oracle for the estimators.
//! - [`km`]: Kaplan-Meier cross-check.
//! - [`report`]: survival tables, non-recovery curves and fit reports.

pub mod distributions;
pub mod error;
pub mod estimation;
pub mod km;
pub mod model;
pub mod optim;
pub mod portfolio;
pub mod report;
pub mod simulation;

pub use distributions::{PoissonParam, WeibullParams};
pub use error::{Error, Result};
pub use estimation::{fit_mle, fit_stratified, FitOptions, FitResult, StratifiedFitResult};
pub use model::{ModelParams, Observation};
pub use portfolio::{ContractRecord, PartitionSpec, Portfolio, SummaryRow};
