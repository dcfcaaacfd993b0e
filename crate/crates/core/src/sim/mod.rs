//! Tilt-rotor VTOL simulator: rigid-body dynamics, actuator models, a
//! cascaded controller and the closed loop through the allocator and the
//! online detector.

mod actuators;
mod aero;
mod controller;
mod params;
mod run;
mod scenario;
mod state;
mod trim;

use thiserror::Error;

pub use actuators::{inject_failures, resolve_failures, ActuatorState, FailureInjection};
pub use aero::{aero_wrench, angle_of_attack, dynamic_pressure, level_flight_drag, wrench_from_actuators};
pub use controller::{attitude_angle, controller_step, ControlOutput, Gains, Setpoint};
pub use params::{ActuatorClass, ActuatorKind, AeroParams, RotorParams, SurfaceParams, VehicleParams};
pub use run::{run_scenario, RunOutput, RunSummary, CRASH_ANGLE_DEG};
pub use scenario::{
    AllocatorConfig, DetectorSettings, InitialState, OutputSettings, Phase, Scenario, Segment, SCHEMA_VERSION, SIGNALS,
};
pub use state::{step_dynamics, RigidBodyState, MAX_STEP};
pub use trim::{level_flight_requirement, solve_trim, Trim};

use crate::alloc::AllocError;
use crate::detector::DetectorError;
use crate::telemetry::TelemetryError;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid vehicle parameters: {0}")]
    InvalidParams(String),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("cannot parse scenario: {0}")]
    Parse(String),
    #[error("{0}")]
    Io(String),
    #[error("unknown actuator {0:?}")]
    UnknownActuator(String),
    #[error("{what} has length {got}, expected {expected}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("physics step {0} outside (0, {max}]", max = MAX_STEP)]
    InvalidStep(f64),
    #[error("non-finite {0}")]
    NonFinite(&'static str),
    #[error(transparent)]
    Alloc(#[from] AllocError),
    #[error(transparent)]
    Detector(#[from] DetectorError),
    #[error(transparent)]
    Telemetry(#[from] TelemetryError),
}
