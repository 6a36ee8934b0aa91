//! Deterministic simulator and library for federated short-term load
//! forecasting: a from-scratch stacked-LSTM forecaster trained across
//! simulated smart-meter clients via FederatedAveraging, with per-client
//! personalization and an analytic network-load model.

pub mod config;
pub mod dataset;
pub mod error;
pub mod fedsim;
pub mod matrix;
pub mod metrics;
pub mod nn;
pub mod report;
pub mod seedmix;

pub use error::{Error, Result};
