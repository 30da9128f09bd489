//! Longitudinal fidelity metrics for comparing synthetic and original
//! time-stamped patient data.

pub mod assignment;
pub mod config;
pub mod covariance;
pub mod error;
pub mod evaluate;
pub mod individual;
pub mod ingest;
pub mod kernel;
pub mod marginal;
pub mod measurement;
pub mod model;
pub mod report;
pub mod simgen;
pub mod svg;

pub use error::{Error, Result};
