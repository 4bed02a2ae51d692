//! Solver and verification harness for singular quasilinear elliptic systems
//! driven by variable-exponent Laplacians on rectangular domains.
//!
//! The crate discretizes -div(|grad u|^{p(x)-2} grad u) = h on structured
//! grids, provides the variable-exponent Lebesgue machinery (modulars,
//! Luxemburg norms), validates the structural hypotheses of the cooperative
//! and competitive system classes, runs the corresponding fixed-point
//! pipelines, and verifies the resulting a priori bounds numerically.

pub mod competitive;
pub mod config;
pub mod cooperative;
pub mod exponents;
pub mod grid;
pub mod moser;
pub mod nonlinearity;
pub mod pde;
pub mod run;
pub mod space;

use thiserror::Error as ThisError;

#[derive(Debug, ThisError)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("hypothesis violation: {0}")]
    Hypothesis(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("non-convergence: {0}")]
    NonConvergence(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
