//! Sparse JSON exchange format.
//!
//! The document is the serde form of [`SdpProblem`]: every coefficient
//! matrix is a list of `[row, col, value]` upper-triangular triplets.

use crate::error::SdpError;
use crate::problem::SdpProblem;

pub fn to_json(p: &SdpProblem) -> String {
    serde_json::to_string_pretty(p).expect("problem serialization cannot fail")
}

pub fn from_json(s: &str) -> Result<SdpProblem, SdpError> {
    let p: SdpProblem = serde_json::from_str(s)?;
    p.validate()?;
    Ok(p)
}
