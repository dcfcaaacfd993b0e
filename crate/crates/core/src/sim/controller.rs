//! Cascaded position and attitude control producing the body wrench the
//! actuators should deliver.

use nalgebra::{UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::alloc::Wrench;

use super::aero::aero_wrench;
use super::params::VehicleParams;
use super::state::RigidBodyState;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Gains {
    pub position_p: f64,
    pub velocity_d: f64,
    /// Angular acceleration per radian of attitude error.
    pub attitude_p: f64,
    /// Angular acceleration per rad/s of rate error.
    pub rate_d: f64,
    /// Norm limit on commanded translational acceleration, m/s^2.
    pub max_accel: f64,
    /// Per-axis torque limit, N m.
    pub max_torque: f64,
    /// Bank angle limit, rad. Lateral force is produced by banking.
    pub max_bank: f64,
}

impl Default for Gains {
    fn default() -> Self {
        Self {
            position_p: 1.44,
            velocity_d: 2.16,
            attitude_p: 36.0,
            rate_d: 9.6,
            max_accel: 5.0,
            max_torque: 5.0,
            max_bank: 0.35,
        }
    }
}

/// Reference the controller tracks at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct Setpoint {
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    pub yaw: f64,
    /// Nose-up pitch, rad. Ignored when `wing_borne` is set.
    pub pitch: f64,
    /// Pitch so the wing carries the vertical force demand.
    pub wing_borne: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlOutput {
    /// Wrench requested from the actuators, body frame. Wing aerodynamics are
    /// already subtracted.
    pub desired: Wrench,
    pub desired_attitude: UnitQuaternion<f64>,
    /// Angle between actual and desired attitude, rad.
    pub attitude_error: f64,
}

/// One control update.
pub fn controller_step(
    params: &VehicleParams,
    state: &RigidBodyState,
    setpoint: &Setpoint,
    gains: &Gains,
) -> ControlOutput {
    let mut accel = (setpoint.position - state.position) * gains.position_p
        + (setpoint.velocity - state.velocity) * gains.velocity_d;
    let norm = accel.norm();
    if norm > gains.max_accel {
        accel *= gains.max_accel / norm;
    }
    let force_world = (accel - params.gravity_vector()) * params.mass;
    let aero = aero_wrench(params, &state.velocity_body());
    let force = state.attitude.inverse_transform_vector(&force_world) - aero.force;

    let pitch = if setpoint.wing_borne {
        lift_pitch(params, state, force_world.z)
    } else {
        setpoint.pitch
    };
    // Lateral demand in the heading frame is met by banking.
    let (sy, cy) = setpoint.yaw.sin_cos();
    let lateral = -sy * force_world.x + cy * force_world.y;
    let bank = (-lateral).atan2(force_world.z.max(1e-6)).clamp(-gains.max_bank, gains.max_bank);
    // body +y rotation is nose-down
    let desired_attitude = UnitQuaternion::from_euler_angles(bank, -pitch, setpoint.yaw);
    let body_error = shortest_body_error(&desired_attitude, &state.attitude);
    let inertia = params.inertia_matrix();
    let alpha = -body_error * gains.attitude_p - state.omega * gains.rate_d;
    let mut torque = inertia * alpha + state.omega.cross(&(inertia * state.omega)) - aero.torque;
    for t in torque.iter_mut() {
        *t = t.clamp(-gains.max_torque, gains.max_torque);
    }
    ControlOutput {
        desired: Wrench::new(force, torque),
        desired_attitude,
        attitude_error: attitude_angle(&desired_attitude, &state.attitude),
    }
}

/// Nose-up pitch giving lift `vertical` at the current airspeed and flight
/// path angle. Level when the wing cannot carry half the weight.
fn lift_pitch(params: &VehicleParams, state: &RigidBodyState, vertical: f64) -> f64 {
    let a = &params.aero;
    let qs = 0.5 * a.air_density * state.velocity.norm_squared() * a.wing_area;
    let cl_max = a.lift_coefficient_zero + a.lift_slope * a.max_alpha;
    if qs * cl_max < 0.5 * params.mass * params.gravity {
        return 0.0;
    }
    let alpha = ((vertical / qs - a.lift_coefficient_zero) / a.lift_slope).clamp(-a.max_alpha, a.max_alpha);
    let horizontal = (state.velocity.x * state.velocity.x + state.velocity.y * state.velocity.y).sqrt();
    let gamma = state.velocity.z.atan2(horizontal);
    alpha + gamma
}

fn shortest_scaled_axis(q: &UnitQuaternion<f64>) -> Vector3<f64> {
    if q.w < 0.0 {
        UnitQuaternion::new_unchecked(-q.into_inner()).scaled_axis()
    } else {
        q.scaled_axis()
    }
}

/// Rotation vector, in the body frame, taking the desired attitude to the
/// actual one along the short way.
fn shortest_body_error(desired: &UnitQuaternion<f64>, actual: &UnitQuaternion<f64>) -> Vector3<f64> {
    shortest_scaled_axis(&(desired.inverse() * actual))
}

/// Geodesic angle between two attitudes, in [0, pi].
pub fn attitude_angle(a: &UnitQuaternion<f64>, b: &UnitQuaternion<f64>) -> f64 {
    let d = a.coords.dot(&b.coords).abs().min(1.0);
    2.0 * d.acos()
}
