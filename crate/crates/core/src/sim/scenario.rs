//! Scenario files: vehicle, flight plan, failures, allocator and detector
//! settings for one closed-loop run.

use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::alloc::{FailureSet, Wrench};
use crate::detector::{ChannelSpec, DetectorConfig};

use super::actuators::{resolve_failures, FailureInjection};
use super::controller::Gains;
use super::params::VehicleParams;
use super::state::MAX_STEP;
use super::trim::{level_flight_requirement, solve_trim};
use super::SimError;

pub const SCHEMA_VERSION: u32 = 1;

/// Signals the simulator can feed to a detector channel.
pub const SIGNALS: [&str; 9] = [
    "tau_x_cmd", "tau_y_cmd", "tau_z_cmd", "f_x_cmd", "f_y_cmd", "f_z_cmd", "p_meas", "q_meas", "r_meas",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "phase", rename_all = "lowercase")]
pub enum Phase {
    /// Hold `position` at heading `yaw`.
    Hover {
        position: [f64; 3],
        #[serde(default)]
        yaw: f64,
    },
    /// Level flight at `speed` along `heading` (rad from east), holding
    /// `altitude`. The track starts where the vehicle is when the segment
    /// begins.
    Cruise {
        speed: f64,
        #[serde(default)]
        heading: f64,
        altitude: f64,
    },
}

impl Phase {
    pub fn trim(&self, params: &VehicleParams) -> Vec<f64> {
        match self {
            Phase::Hover { .. } => params.hover_trim(),
            Phase::Cruise { speed, .. } => params.cruise_trim(*speed),
        }
    }

    /// Actuator wrench and dynamic pressure of the steady state this phase
    /// flies.
    pub fn requirement(&self, params: &VehicleParams) -> (Wrench, f64) {
        match self {
            Phase::Hover { .. } => level_flight_requirement(params, 0.0),
            Phase::Cruise { speed, .. } => level_flight_requirement(params, *speed),
        }
    }

    /// Trim re-solved with `failures` held at their forced values, starting
    /// from the healthy one.
    pub fn trim_with(&self, params: &VehicleParams, failures: &FailureSet) -> Result<Vec<f64>, SimError> {
        let healthy = self.trim(params);
        if failures.is_empty() {
            return Ok(healthy);
        }
        let (required, q) = self.requirement(params);
        Ok(solve_trim(params, q, &required, &healthy, failures)?.u)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub duration: f64,
    #[serde(flatten)]
    pub phase: Phase,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AllocatorConfig {
    /// Whether the allocator is told which actuators failed.
    pub informed: bool,
    /// Cost weights; the vehicle defaults when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    pub rate_limits: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub row_mask: Option<[bool; 6]>,
    /// Healthy motors are linearized at no less than this command, where the
    /// thrust slope is still useful.
    pub min_motor_linearization: f64,
    /// Wrench row weights used when the box admits no exact solution.
    /// Torque rows dominate so attitude is held at the cost of position.
    pub fallback_row_weights: [f64; 6],
    /// Pull toward trim in that case, relative to the wrench term. Large
    /// enough to keep the null space from drifting.
    pub fallback_regularization: f64,
    /// Re-solve the trim anchor whenever a known failure appears.
    pub adapt_trim: bool,
    /// Allocate the actuator state reachable at the next control step and
    /// invert the first-order lag to get the command. Rate limits then bound
    /// actuator motion rather than the command.
    pub lag_compensation: bool,
}

impl Default for AllocatorConfig {
    fn default() -> Self {
        Self {
            informed: true,
            weights: None,
            rate_limits: true,
            row_mask: None,
            min_motor_linearization: 0.05,
            fallback_row_weights: [1.0, 1.0, 1.0, 20.0, 20.0, 20.0],
            fallback_regularization: 1e-3,
            adapt_trim: true,
            lag_compensation: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorSettings {
    pub enabled: bool,
    pub config: DetectorConfig,
    pub channels: Vec<ChannelSpec>,
    /// Standard deviation of white noise added to measured signals.
    pub noise_std: f64,
}

impl Default for DetectorSettings {
    fn default() -> Self {
        Self {
            enabled: true,
            config: DetectorConfig::default(),
            channels: ChannelSpec::attitude_defaults(),
            noise_std: 0.002,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputSettings {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub telemetry: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub summary: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialState {
    pub position: [f64; 3],
    #[serde(default)]
    pub velocity: [f64; 3],
    #[serde(default)]
    pub yaw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub schema_version: u32,
    pub name: String,
    #[serde(default)]
    pub vehicle: VehicleParams,
    #[serde(default)]
    pub gains: Gains,
    /// Derived from the first segment when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<InitialState>,
    pub plan: Vec<Segment>,
    #[serde(default)]
    pub failures: Vec<FailureInjection>,
    #[serde(default)]
    pub allocator: AllocatorConfig,
    #[serde(default)]
    pub detector: DetectorSettings,
    #[serde(default)]
    pub output: OutputSettings,
    /// Total simulated time; the plan length when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration: Option<f64>,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_control_dt")]
    pub control_dt: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_dt() -> f64 {
    0.002
}

fn default_control_dt() -> f64 {
    0.01
}

impl Scenario {
    /// Hover at `position` for `duration` seconds with default settings.
    pub fn hover(name: &str, position: [f64; 3], duration: f64) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            name: name.to_string(),
            vehicle: VehicleParams::default(),
            gains: Gains::default(),
            initial: None,
            plan: vec![Segment {
                duration,
                phase: Phase::Hover { position, yaw: 0.0 },
            }],
            failures: Vec::new(),
            allocator: AllocatorConfig::default(),
            detector: DetectorSettings::default(),
            output: OutputSettings::default(),
            duration: None,
            dt: default_dt(),
            control_dt: default_control_dt(),
            seed: 0,
        }
    }

    /// Level cruise for `duration` seconds with default settings.
    pub fn cruise(name: &str, speed: f64, altitude: f64, duration: f64) -> Self {
        let mut s = Self::hover(name, [0.0, 0.0, altitude], duration);
        s.plan[0].phase = Phase::Cruise {
            speed,
            heading: 0.0,
            altitude,
        };
        s
    }

    pub fn from_json(text: &str) -> Result<Self, SimError> {
        let s: Scenario = serde_json::from_str(text).map_err(|e| SimError::Parse(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| SimError::Io(format!("{}: {e}", path.as_ref().display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn plan_length(&self) -> f64 {
        self.plan.iter().map(|s| s.duration).sum()
    }

    pub fn total_duration(&self) -> f64 {
        self.duration.unwrap_or_else(|| self.plan_length())
    }

    /// Physics steps per control step.
    pub fn substeps(&self) -> usize {
        (self.control_dt / self.dt).round() as usize
    }

    pub fn control_steps(&self) -> usize {
        (self.total_duration() / self.control_dt).round() as usize
    }

    /// Segment active at `time`; the last one extends past the plan.
    pub fn segment_at(&self, time: f64) -> usize {
        let mut end = 0.0;
        for (i, s) in self.plan.iter().enumerate() {
            end += s.duration;
            if time < end - 1e-9 {
                return i;
            }
        }
        self.plan.len() - 1
    }

    pub fn initial_state(&self) -> InitialState {
        if let Some(init) = &self.initial {
            return init.clone();
        }
        match &self.plan[0].phase {
            Phase::Hover { position, yaw } => InitialState {
                position: *position,
                velocity: [0.0; 3],
                yaw: *yaw,
            },
            Phase::Cruise {
                speed,
                heading,
                altitude,
            } => InitialState {
                position: [0.0, 0.0, *altitude],
                velocity: [speed * heading.cos(), speed * heading.sin(), 0.0],
                yaw: *heading,
            },
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::InvalidScenario(m));
        if self.schema_version != SCHEMA_VERSION {
            return bad(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        self.vehicle.validate()?;
        if self.plan.is_empty() {
            return bad("plan needs at least one segment".into());
        }
        for (i, s) in self.plan.iter().enumerate() {
            if !(s.duration > 0.0 && s.duration.is_finite()) {
                return bad(format!("segment {i} duration must be positive"));
            }
            let finite = match &s.phase {
                Phase::Hover { position, yaw } => position.iter().all(|v| v.is_finite()) && yaw.is_finite(),
                Phase::Cruise {
                    speed,
                    heading,
                    altitude,
                } => *speed > 0.0 && speed.is_finite() && heading.is_finite() && altitude.is_finite(),
            };
            if !finite {
                return bad(format!("segment {i} has invalid values"));
            }
        }
        if !(self.dt > 0.0 && self.dt <= MAX_STEP) {
            return bad(format!("dt must lie in (0, {MAX_STEP}]"));
        }
        let ratio = self.control_dt / self.dt;
        if !(ratio >= 1.0 - 1e-9) || (ratio - ratio.round()).abs() > 1e-6 {
            return bad("control_dt must be a whole multiple of dt".into());
        }
        if !(self.total_duration() > 0.0 && self.total_duration().is_finite()) {
            return bad("duration must be positive".into());
        }
        resolve_failures(&self.vehicle, &self.failures)?;
        if let Some(w) = &self.allocator.weights {
            if w.len() != self.vehicle.actuator_count() || w.iter().any(|v| !(*v > 0.0)) {
                return bad("allocator weights need one positive entry per actuator".into());
            }
        }
        if self.allocator.fallback_row_weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
            return bad("fallback_row_weights must be positive".into());
        }
        let mu = self.allocator.fallback_regularization;
        if !(mu > 0.0 && mu.is_finite()) {
            return bad("fallback_regularization must be positive".into());
        }
        if !(self.allocator.min_motor_linearization >= 0.0) {
            return bad("min_motor_linearization must be non-negative".into());
        }
        if self.detector.enabled {
            self.detector.config.monitor.validate()?;
            self.detector.config.arx.validate()?;
            if !(self.detector.noise_std >= 0.0) {
                return bad("noise_std must be non-negative".into());
            }
            for c in &self.detector.channels {
                for sig in [&c.input, &c.output] {
                    if !SIGNALS.contains(&sig.as_str()) {
                        return bad(format!("channel {} uses unknown signal {sig}", c.name));
                    }
                }
            }
        }
        if let Some(init) = &self.initial {
            if !init.position.iter().chain(&init.velocity).all(|v| v.is_finite()) {
                return bad("initial state must be finite".into());
            }
        }
        Ok(())
    }

    pub fn initial_position(&self) -> Vector3<f64> {
        Vector3::from(self.initial_state().position)
    }
}
