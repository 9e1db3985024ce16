//! Device-independent randomness certification for two-party Bell tests.
//!
//! The pipeline runs from a two-qubit model or recorded coincidence counts,
//! through correlators and Bell values, to lower bounds on the min-entropy
//! and the conditional von Neumann entropy of the outcomes.

pub mod certify;
pub mod error;
pub mod ncalg;
pub mod qmodel;
pub mod stats;

pub use error::{Error, Result};
