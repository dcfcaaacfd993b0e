//! Null-space control allocation.
//!
//! A desired wrench deviation `δw` is mapped to actuator setpoints as
//!
//! ```text
//! u_sp = u_lin + B⁺·δw + N·λ
//! ```
//!
//! where `B` is the 6×n effectiveness matrix linearized at `u_lin`, `B⁺` its
//! pseudo-inverse and `N` an orthonormal basis of its null space. The
//! null-space coordinates `λ` minimize `(u_sp − u_trim)ᵀ R (u_sp − u_trim)`
//! subject to the actuator box, so the wrench produced by the least-norm part
//! is preserved exactly whenever the box admits a solution.
//!
//! Failed actuators are removed from the problem and their forced deviation
//! is charged against the desired wrench before solving.

mod failure;
mod layout;
mod linalg;
mod qp;
mod solve;
mod wrench;

pub use failure::{reconfigure_for_failure, FailureMode, FailureSet, ReducedProblem};
pub use layout::ActuatorLayout;
pub use linalg::{least_norm, null_basis, Decomposition, RANK_TOLERANCE};
pub use qp::{solve_qp, QpSolution, QpStatus};
pub use solve::{
    allocate, solve_allocation, solve_allocation_weighted, AllocationProblem, AllocationResult, Bound, Fallback, RateLimit,
    WarmStart, DEFAULT_FALLBACK_REGULARIZATION,
};
pub use wrench::{linearize_effectiveness, EffectivenessMatrix, Wrench};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AllocError {
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    Dimension { what: &'static str, expected: usize, got: usize },
    #[error("weight {index} must be positive, got {value}")]
    NonPositiveWeight { index: usize, value: f64 },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("invalid actuator layout: {0}")]
    InvalidLayout(String),
    #[error("invalid failure set: {0}")]
    InvalidFailure(String),
    #[error("every actuator has failed; nothing left to allocate")]
    Unrecoverable,
    #[error("finite-difference step {index} must be positive, got {value}")]
    InvalidStep { index: usize, value: f64 },
}
