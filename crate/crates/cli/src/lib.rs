//! Command-line front end: simulate the two-qubit model, ingest coincidence
//! counts, certify entropy, and rerun the bundled experimental tables.
//!
//! Exit codes are 0 on success, 1 for invalid input, 2 when a solve did not
//! converge, and 3 when a reproduced value misses its tolerance.

pub mod commands;
pub mod fixtures;
pub mod params;
pub mod reproduce;

use dicert_sdp::SolverOptions;
use thiserror::Error;

/// Overrides the solver's gap and feasibility tolerances.
pub const SOLVER_TOL_ENV: &str = "DICERT_SOLVER_TOL";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Solver(String),
    #[error("{0}")]
    Mismatch(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Solver(_) => 2,
            CliError::Mismatch(_) => 3,
        }
    }
}

impl From<dicert::Error> for CliError {
    fn from(e: dicert::Error) -> Self {
        match e {
            dicert::Error::Solver(_) | dicert::Error::Sdp(_) => CliError::Solver(e.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Validation(e.to_string())
    }
}

/// Default solver options, with tolerances taken from the environment when
/// it sets them.
pub fn solver_options() -> Result<SolverOptions, CliError> {
    let mut o = SolverOptions::default();
    if let Ok(v) = std::env::var(SOLVER_TOL_ENV) {
        let tol: f64 = v
            .trim()
            .parse()
            .map_err(|_| CliError::Validation(format!("{SOLVER_TOL_ENV}={v:?} is not a number")))?;
        o.gap_tol = tol;
        o.feas_tol = tol;
        o.validate().map_err(|e| CliError::Validation(format!("{SOLVER_TOL_ENV}: {e}")))?;
    }
    Ok(o)
}
