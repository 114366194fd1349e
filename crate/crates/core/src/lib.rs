//! Direct estimation of the difference between inverse spectral density
//! matrices of two stationary multivariate time series.
//!
//! Pipeline: [`timeseries`] panels are turned into smoothed periodograms by
//! [`spectral`], expanded to real block form by [`realspace`], and fed to the
//! penalised D-trace solver in [`dtrace`]. [`tuning`] picks the penalty by
//! eBIC; [`baselines`], [`varsim`] and [`metrics`] form the validation harness,
//! and [`pipeline`] strings the steps together over many frequencies.

pub mod baselines;
pub mod dtrace;
pub mod error;
pub mod matrix_io;
pub mod metrics;
pub mod pipeline;
pub mod realspace;
pub mod spectral;
pub mod timeseries;
pub mod tuning;
pub mod varsim;

pub use error::{Result, SddError};
