//! Small dense semidefinite programming toolkit: problem description, an
//! interior-point solver, independent residual verification, and the real
//! embedding of Hermitian constraints.

pub mod error;
mod factor;
pub mod io;
pub mod problem;
pub mod realify;
pub mod solver;
pub mod verify;

pub use error::SdpError;
pub use problem::{LinearConstraint, LmiBlock, SdpProblem, SymSparse};
pub use realify::{realify, ComplexLmiBlock, HermSparse};
pub use solver::{solve, SdpSolution, SolveStatus, SolverOptions};
pub use verify::{verify, ResidualReport};
