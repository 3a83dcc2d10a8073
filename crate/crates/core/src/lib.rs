//! Spectral factorization, integrability conditions and finite past/future
//! subspace geometry for multivariate stationary processes.

pub mod conditions;
pub mod config;
pub mod error;
pub mod factorization;
mod levinson;
pub mod linalg;
pub mod models;
pub mod quadrature;
pub mod report;
pub mod subspace;

pub use error::{Error, Result};
