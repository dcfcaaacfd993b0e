//! Closed-loop run: controller, allocator, actuators, rigid body and the
//! online detector stepped together, with every control step logged.

use nalgebra::{DVector, UnitQuaternion, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::alloc::{
    allocate, linearize_effectiveness, ActuatorLayout, AllocationProblem, FailureMode, FailureSet, RateLimit, WarmStart, Wrench,
};
use crate::detector::{DetectionEvent, DetectorChannel};
use crate::telemetry::Telemetry;

use super::actuators::{inject_failures, resolve_failures, ActuatorState};
use super::aero::{aero_wrench, dynamic_pressure, wrench_from_actuators};
use super::controller::{controller_step, Setpoint};
use super::params::{ActuatorKind, VehicleParams};
use super::scenario::{Phase, Scenario};
use super::state::RigidBodyState;
use super::SimError;

/// Roll or pitch beyond this, in degrees, counts as a crash.
pub const CRASH_ANGLE_DEG: f64 = 90.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub name: String,
    pub informed: bool,
    pub crashed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub crash_time: Option<f64>,
    pub end_time: f64,
    pub max_attitude_error_deg: f64,
    pub final_position_error: f64,
    pub max_allocation_residual: f64,
    pub mean_allocation_residual: f64,
    pub fallback_steps: usize,
    /// `|desired - achieved|` of the allocator at every control step.
    pub allocation_residuals: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure_time: Option<f64>,
    /// Ordered by `(time, channel)`.
    pub detections: Vec<DetectionEvent>,
}

impl RunSummary {
    /// First detection at or after the first failure.
    pub fn first_detection_after_failure(&self) -> Option<&DetectionEvent> {
        let t0 = self.failure_time?;
        self.detections.iter().find(|e| e.time >= t0)
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub summary: RunSummary,
    pub telemetry: Telemetry,
}

/// Tracks plan segments and the anchor of the current cruise track.
struct Planner {
    segment: usize,
    start: f64,
    anchor: Vector3<f64>,
    /// Trim of the current segment and the number of known failures it was
    /// solved for.
    trim: Option<(usize, usize, Vec<f64>)>,
}

impl Planner {
    fn trim(&mut self, scenario: &Scenario, known: &FailureSet) -> Result<Vec<f64>, SimError> {
        let key = (self.segment, known.entries.len());
        match &self.trim {
            Some((seg, count, u)) if (*seg, *count) == key => Ok(u.clone()),
            _ => {
                let phase = &scenario.plan[self.segment].phase;
                let u = if scenario.allocator.adapt_trim {
                    phase.trim_with(&scenario.vehicle, known)?
                } else {
                    phase.trim(&scenario.vehicle)
                };
                self.trim = Some((key.0, key.1, u.clone()));
                Ok(u)
            }
        }
    }

    fn setpoint(&mut self, scenario: &Scenario, state: &RigidBodyState, time: f64) -> Setpoint {
        let seg = scenario.segment_at(time);
        if seg != self.segment {
            self.segment = seg;
            self.start = scenario.plan[..seg].iter().map(|s| s.duration).sum();
            self.anchor = state.position;
        }
        match &scenario.plan[seg].phase {
            Phase::Hover { position, yaw } => Setpoint {
                position: Vector3::from(*position),
                velocity: Vector3::zeros(),
                yaw: *yaw,
                pitch: 0.0,
                wing_borne: false,
            },
            Phase::Cruise {
                speed,
                heading,
                altitude,
            } => {
                let v = Vector3::new(heading.cos(), heading.sin(), 0.0) * *speed;
                let mut p = Vector3::new(self.anchor.x, self.anchor.y, *altitude) + v * (time - self.start);
                p.z = *altitude;
                Setpoint {
                    position: p,
                    velocity: v,
                    yaw: *heading,
                    pitch: 0.0,
                    wing_borne: true,
                }
            }
        }
    }
}

fn columns(params: &VehicleParams, scenario: &Scenario, signals: &[String]) -> Vec<String> {
    let mut c: Vec<String> = [
        "time", "pos_x", "pos_y", "pos_z", "vel_x", "vel_y", "vel_z", "qw", "qx", "qy", "qz", "omega_x", "omega_y",
        "omega_z", "roll_deg", "pitch_deg", "yaw_deg", "sp_x", "sp_y", "sp_z", "att_err_deg",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let names = params.actuator_names();
    c.extend(names.iter().map(|n| format!("u_sp_{n}")));
    c.extend(names.iter().map(|n| format!("u_{n}")));
    for prefix in ["w_des", "w_ach"] {
        c.extend(["fx", "fy", "fz", "tx", "ty", "tz"].iter().map(|a| format!("{prefix}_{a}")));
    }
    c.push("alloc_residual".into());
    c.push("alloc_fallback".into());
    c.extend(signals.iter().cloned());
    if scenario.detector.enabled {
        c.extend(scenario.detector.channels.iter().map(|ch| format!("z_{}", ch.name)));
    }
    c
}

/// Point at which to linearize the actuator wrench. Known failed actuators
/// sit at their forced value; healthy motors are kept off zero thrust where
/// the slope vanishes.
fn linearization_point(params: &VehicleParams, previous: &[f64], known: &FailureSet, floor: f64) -> Vec<f64> {
    (0..previous.len())
        .map(|i| match known.mode_of(i) {
            Some(mode) => mode.forced_value(),
            None => match params.kind(i) {
                ActuatorKind::Motor(_) => previous[i].max(floor.min(params.motor.max)),
                _ => previous[i],
            },
        })
        .collect()
}

fn signal_value(name: &str, desired: &Wrench, measured_rate: &Vector3<f64>) -> f64 {
    match name {
        "tau_x_cmd" => desired.torque.x,
        "tau_y_cmd" => desired.torque.y,
        "tau_z_cmd" => desired.torque.z,
        "f_x_cmd" => desired.force.x,
        "f_y_cmd" => desired.force.y,
        "f_z_cmd" => desired.force.z,
        "p_meas" => measured_rate.x,
        "q_meas" => measured_rate.y,
        "r_meas" => measured_rate.z,
        _ => f64::NAN,
    }
}

/// Run a scenario to its end or until the vehicle crashes.
pub fn run_scenario(scenario: &Scenario) -> Result<RunOutput, SimError> {
    scenario.validate()?;
    let params = &scenario.vehicle;
    let n = params.actuator_count();
    let failures = resolve_failures(params, &scenario.failures)?;
    let failure_time = failures.iter().map(|f| f.0).reduce(f64::min);
    let weights = DVector::from_vec(scenario.allocator.weights.clone().unwrap_or_else(|| params.default_weights()));
    let steps = params.linearization_steps();

    let init = scenario.initial_state();
    let mut state = RigidBodyState {
        time: 0.0,
        position: Vector3::from(init.position),
        velocity: Vector3::from(init.velocity),
        attitude: UnitQuaternion::from_euler_angles(0.0, 0.0, init.yaw),
        omega: Vector3::zeros(),
    };
    let first_trim = scenario.plan[0].phase.trim(params);
    let mut actuators = ActuatorState::new(&first_trim);
    // The controller's own prediction of the actuator outputs: the lag model
    // driven by its commands, with only the failures it knows about.
    let mut predicted = actuators.clone();
    let mut planner = Planner {
        segment: 0,
        start: 0.0,
        anchor: state.position,
        trim: None,
    };

    let mut channels = Vec::new();
    let mut signals: Vec<String> = Vec::new();
    if scenario.detector.enabled {
        for spec in &scenario.detector.channels {
            channels.push(DetectorChannel::new(spec, &scenario.detector.config)?);
            for s in [&spec.input, &spec.output] {
                if !signals.contains(s) {
                    signals.push(s.clone());
                }
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let noise = Normal::new(0.0, scenario.detector.noise_std).map_err(|e| SimError::InvalidParams(e.to_string()))?;

    let mut telemetry = Telemetry::new(columns(params, scenario, &signals))?;
    let mut warm: Option<WarmStart> = None;
    let mut residuals = Vec::new();
    let mut fallback_steps = 0;
    let mut detections = Vec::new();
    let mut max_att_err: f64 = 0.0;
    let mut crash_time = None;
    let mut last_error = 0.0;

    let substeps = scenario.substeps();
    let total = scenario.control_steps();
    for k in 0..total {
        let t = k as f64 * scenario.control_dt;
        state.time = t;
        inject_failures(&mut actuators, &failures, t);
        if scenario.allocator.informed {
            inject_failures(&mut predicted, &failures, t);
        }

        let setpoint = planner.setpoint(scenario, &state, t);
        let control = controller_step(params, &state, &setpoint, &scenario.gains);

        let known = if scenario.allocator.informed {
            FailureSet::new(
                failures
                    .iter()
                    .filter(|f| f.0 <= t)
                    .map(|f| (f.1, f.2))
                    .collect::<Vec<(usize, FailureMode)>>(),
            )
        } else {
            FailureSet::none()
        };
        let trim = planner.trim(scenario, &known)?;
        let previous = actuators.commanded.clone();
        let lin = linearization_point(params, &predicted.actual, &known, scenario.allocator.min_motor_linearization);
        let q = dynamic_pressure(params, &state.velocity_body());
        let model = |u: &[f64]| wrench_from_actuators(params, u, q);
        let matrix = linearize_effectiveness(model, &lin, &steps)?;
        let base = model(&lin);
        let desired = (control.desired - base).to_dvector();
        let lag = scenario.allocator.lag_compensation;
        // With lag compensation the allocator picks the actuator state one
        // control step ahead, inside what the lag lets it reach, and the
        // command is recovered by inverting the lag.
        let reach: Vec<f64> = (0..n)
            .map(|i| if lag { 1.0 - (-scenario.control_dt / params.class(i).time_constant).exp() } else { 1.0 })
            .collect();
        let layout = if lag {
            let base_layout = params.layout(&trim)?;
            let lo: Vec<f64> = (0..n).map(|i| predicted.actual[i] + reach[i] * (base_layout.u_min[i] - predicted.actual[i])).collect();
            let hi: Vec<f64> = (0..n).map(|i| predicted.actual[i] + reach[i] * (base_layout.u_max[i] - predicted.actual[i])).collect();
            let anchor = (0..n).map(|i| trim[i].clamp(lo[i], hi[i])).collect();
            let mut l = ActuatorLayout::new(base_layout.names, lo, hi, anchor)?;
            l.rate_limit = base_layout.rate_limit;
            l
        } else {
            params.layout(&trim)?
        };
        let mut problem = AllocationProblem::new(matrix, desired, layout, weights.clone());
        problem.failures = known;
        problem.warm_start = warm.take();
        problem.row_mask = scenario.allocator.row_mask;
        problem.fallback_row_weights = scenario.allocator.fallback_row_weights;
        problem.fallback_regularization = scenario.allocator.fallback_regularization;
        if scenario.allocator.rate_limits {
            problem.rate = Some(RateLimit {
                previous: DVector::from_vec(if lag { predicted.actual.clone() } else { previous.clone() }),
                dt: scenario.control_dt,
            });
        }
        let result = allocate(&problem)?;
        warm = Some(result.warm_start());
        residuals.push(result.wrench_residual);
        if result.fallback {
            fallback_steps += 1;
        }
        let command: Vec<f64> = (0..n)
            .map(|i| {
                let c = params.class(i);
                let a = predicted.actual[i];
                (a + (result.u_sp[i] - a) / reach[i]).clamp(c.min, c.max)
            })
            .collect();
        actuators.set_command(&command);
        predicted.set_command(&command);

        let measured = state.omega.map(|w| w + noise.sample(&mut rng));
        let signal_values: Vec<f64> = signals
            .iter()
            .map(|s| signal_value(s, &control.desired, &measured))
            .collect();
        let mut z_values = Vec::with_capacity(channels.len());
        for ch in channels.iter_mut() {
            let u = signal_values[signals.iter().position(|s| s == ch.input_signal()).expect("signal registered")];
            let y = signal_values[signals.iter().position(|s| s == ch.output_signal()).expect("signal registered")];
            let step = ch.step(u, y, t)?;
            z_values.push(step.prediction.map_or(f64::NAN, |p| p.z));
            if let Some(e) = step.event {
                detections.push(e);
            }
        }

        let achieved = wrench_from_actuators(params, &actuators.actual, q);
        let (roll, pitch, yaw) = state.euler();
        max_att_err = max_att_err.max(control.attitude_error);
        last_error = (state.position - setpoint.position).norm();
        let mut row = vec![
            t,
            state.position.x,
            state.position.y,
            state.position.z,
            state.velocity.x,
            state.velocity.y,
            state.velocity.z,
            state.attitude.w,
            state.attitude.i,
            state.attitude.j,
            state.attitude.k,
            state.omega.x,
            state.omega.y,
            state.omega.z,
            roll.to_degrees(),
            pitch.to_degrees(),
            yaw.to_degrees(),
            setpoint.position.x,
            setpoint.position.y,
            setpoint.position.z,
            control.attitude_error.to_degrees(),
        ];
        row.extend(&command);
        row.extend(&actuators.actual);
        row.extend(control.desired.to_vector().iter());
        row.extend(achieved.to_vector().iter());
        row.push(result.wrench_residual);
        row.push(if result.fallback { 1.0 } else { 0.0 });
        row.extend(&signal_values);
        row.extend(&z_values);
        telemetry.push_row(row)?;

        if roll.to_degrees().abs() > CRASH_ANGLE_DEG
            || pitch.to_degrees().abs() > CRASH_ANGLE_DEG
            || state.position.z < 0.0
        {
            crash_time = Some(t);
            break;
        }

        for _ in 0..substeps {
            actuators.update(params, scenario.dt);
            predicted.update(params, scenario.dt);
            let v_body = state.velocity_body();
            let wrench = wrench_from_actuators(params, &actuators.actual, dynamic_pressure(params, &v_body))
                + aero_wrench(params, &v_body);
            state = super::state::step_dynamics(params, &state, &wrench, scenario.dt)?;
        }
        debug_assert_eq!(actuators.commanded.len(), n);
    }

    let count = residuals.len().max(1) as f64;
    let end_time = telemetry.rows().last().map_or(0.0, |r| r[0]);
    // Same order as an offline replay of the log.
    detections.sort_by(|a, b| a.time.total_cmp(&b.time).then_with(|| a.channel.cmp(&b.channel)));
    let summary = RunSummary {
        name: scenario.name.clone(),
        informed: scenario.allocator.informed,
        crashed: crash_time.is_some(),
        crash_time,
        end_time,
        max_attitude_error_deg: max_att_err.to_degrees(),
        final_position_error: last_error,
        max_allocation_residual: residuals.iter().copied().fold(0.0, f64::max),
        mean_allocation_residual: residuals.iter().sum::<f64>() / count,
        fallback_steps,
        allocation_residuals: residuals,
        failure_time,
        detections,
    };
    Ok(RunOutput { summary, telemetry })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::scenario::Segment;

    #[test]
    fn hover_holds_still() {
        let mut s = Scenario::hover("hold", [0.0, 0.0, 20.0], 5.0);
        s.detector.noise_std = 0.0;
        let out = run_scenario(&s).unwrap();
        assert!(!out.summary.crashed);
        assert!(out.summary.final_position_error < 1e-3, "{}", out.summary.final_position_error);
        assert!(out.summary.max_attitude_error_deg < 0.1);
        assert_eq!(out.telemetry.len(), 500);
    }

    #[test]
    fn altitude_step_settles() {
        let mut s = Scenario::hover("step", [0.0, 0.0, 20.0], 2.0);
        s.plan.push(Segment {
            duration: 10.0,
            phase: Phase::Hover {
                position: [0.0, 0.0, 21.0],
                yaw: 0.0,
            },
        });
        let out = run_scenario(&s).unwrap();
        let z = out.telemetry.column("pos_z").unwrap();
        let t = out.telemetry.column("time").unwrap();
        // Within 5% of the step from 8 s after the command onward.
        for (ti, zi) in t.iter().zip(&z) {
            if *ti >= 10.0 {
                assert!((zi - 21.0).abs() <= 0.05, "t={ti} z={zi}");
            }
        }
    }

    #[test]
    fn cruise_holds_track() {
        let s = Scenario::cruise("cruise", 18.0, 30.0, 10.0);
        let out = run_scenario(&s).unwrap();
        assert!(!out.summary.crashed);
        assert!(out.summary.final_position_error < 0.5, "{}", out.summary.final_position_error);
        assert!(out.summary.max_attitude_error_deg < 5.0);
    }

    #[test]
    fn same_seed_same_run() {
        let s = Scenario::hover("h", [0.0, 0.0, 10.0], 2.0);
        let a = run_scenario(&s).unwrap();
        let b = run_scenario(&s).unwrap();
        assert_eq!(a.summary, b.summary);
        let bits = |t: &Telemetry| -> Vec<u64> { t.rows().iter().flatten().map(|v| v.to_bits()).collect() };
        assert_eq!(bits(&a.telemetry), bits(&b.telemetry));
    }
}
