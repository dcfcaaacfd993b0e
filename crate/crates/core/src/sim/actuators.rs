//! Actuator response: first-order lag toward the command, clamped to range,
//! with failed actuators overridden.

use serde::{Deserialize, Serialize};

use crate::alloc::FailureMode;

use super::params::VehicleParams;
use super::SimError;

/// Failure of a named actuator from `time` onward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureInjection {
    pub time: f64,
    pub actuator: String,
    pub mode: FailureMode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActuatorState {
    pub commanded: Vec<f64>,
    pub actual: Vec<f64>,
    /// Forced value of each failed actuator.
    pub overrides: Vec<Option<f64>>,
}

impl ActuatorState {
    /// Actuators settled at `initial`.
    pub fn new(initial: &[f64]) -> Self {
        Self {
            commanded: initial.to_vec(),
            actual: initial.to_vec(),
            overrides: vec![None; initial.len()],
        }
    }

    pub fn set_command(&mut self, command: &[f64]) {
        self.commanded.copy_from_slice(command);
    }

    /// Advance the actual positions by `dt`. Exact discretization of the lag,
    /// so the response does not depend on the physics step.
    pub fn update(&mut self, params: &VehicleParams, dt: f64) {
        for (i, actual) in self.actual.iter_mut().enumerate() {
            if let Some(v) = self.overrides[i] {
                *actual = v;
                continue;
            }
            let class = params.class(i);
            let target = self.commanded[i].clamp(class.min, class.max);
            let a = 1.0 - (-dt / class.time_constant).exp();
            *actual = (*actual + (target - *actual) * a).clamp(class.min, class.max);
        }
    }

    pub fn failed(&self) -> Vec<usize> {
        (0..self.overrides.len())
            .filter(|&i| self.overrides[i].is_some())
            .collect()
    }
}

/// Resolve actuator names to indices, checking the modes against the ranges.
pub fn resolve_failures(
    params: &VehicleParams,
    injections: &[FailureInjection],
) -> Result<Vec<(f64, usize, FailureMode)>, SimError> {
    let names = params.actuator_names();
    injections
        .iter()
        .map(|f| {
            let i = names
                .iter()
                .position(|n| n == &f.actuator)
                .ok_or_else(|| SimError::UnknownActuator(f.actuator.clone()))?;
            if !f.time.is_finite() || f.time < 0.0 {
                return Err(SimError::InvalidParams(format!(
                    "failure time for {} must be finite and non-negative",
                    f.actuator
                )));
            }
            let class = params.class(i);
            let v = f.mode.forced_value();
            if !v.is_finite() || v < class.min || v > class.max {
                return Err(SimError::InvalidParams(format!(
                    "{} cannot be held at {v}",
                    f.actuator
                )));
            }
            Ok((f.time, i, f.mode))
        })
        .collect()
}

/// Apply every failure whose time has come. A failed actuator jumps to its
/// forced value and stays there. Returns the indices newly failed.
pub fn inject_failures(
    state: &mut ActuatorState,
    failures: &[(f64, usize, FailureMode)],
    time: f64,
) -> Vec<usize> {
    let mut fresh = Vec::new();
    for &(t, i, mode) in failures {
        if t <= time && state.overrides[i].is_none() {
            let v = mode.forced_value();
            state.overrides[i] = Some(v);
            state.actual[i] = v;
            fresh.push(i);
        }
    }
    fresh
}
