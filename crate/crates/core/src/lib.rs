//! Fault detection and failure-tolerant control allocation for over-actuated
//! tiltrotor VTOL aircraft.
//!
//! The crate is split into four parts:
//!
//! - [`detector`]: per-channel ARX models estimated online by recursive least
//!   squares, with a Z-score alarm on the one-step prediction residual.
//! - [`alloc`]: pseudo-inverse plus null-space control allocation under box
//!   constraints, with reconfiguration when actuators fail.
//! - [`sim`]: a deterministic 6-DOF tiltrotor simulator with actuator lag,
//!   a cascaded PD controller and timed failure injection.
//! - [`harness`]: scenario files, the failure battery, detection metrics,
//!   convergence analysis and SVG plotting used by the command-line tool.
//!
//! Batch workloads (Monte Carlo seeds, random allocation instances, scenario
//! batteries) go through [`exec`], which uses rayon when the `parallel`
//! feature is enabled and falls back to plain iteration otherwise.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod alloc;
pub mod detector;
pub mod exec;
pub mod harness;
pub mod sim;
pub mod telemetry;

mod error;

pub use error::{Error, Result};
