//! Sparse robust regression with a zero-norm penalty.
//!
//! Solves `min_x (1/n)‖Ax − b‖₁ + (μ/2)‖x‖² + ν‖x‖₀` through an equivalent
//! DC surrogate. Two solvers are provided:
//!
//! - [`pmm`]: proximal majorization-minimization whose convex subproblems
//!   are solved by a dual semismooth Newton-CG method ([`sncg`]);
//! - [`ipadmm`]: an indefinite-proximal ADMM on a Moreau-smoothed version
//!   of the surrogate, used as a baseline.
//!
//! [`data`] generates synthetic instances, [`bench`] holds metrics and
//! experiment drivers.

pub mod bench;
pub mod data;
pub mod error;
pub mod ipadmm;
pub mod linalg;
pub mod penalty;
pub mod pmm;
pub mod problem;
pub mod sncg;

pub use bench::RunRecord;
pub use data::{SyntheticInstance, SyntheticSpec};
pub use error::{Error, Result};
pub use ipadmm::{AdmmConfig, AdmmStart};
pub use linalg::DenseMatrix;
pub use penalty::PenaltyParams;
pub use pmm::{PmmConfig, SolveReport, Termination};
pub use problem::ProblemInstance;
pub use sncg::{SncgConfig, SubproblemSpec};
