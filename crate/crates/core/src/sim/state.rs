//! Rigid-body state and integration. World frame is east-north-up, body frame
//! forward-left-up; `attitude` maps body vectors into the world frame.

use nalgebra::{Quaternion, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::alloc::Wrench;

use super::params::VehicleParams;
use super::SimError;

/// Largest physics step accepted by [`step_dynamics`].
pub const MAX_STEP: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RigidBodyState {
    pub time: f64,
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    pub attitude: UnitQuaternion<f64>,
    /// Body angular rate, rad/s.
    pub omega: Vector3<f64>,
}

impl Default for RigidBodyState {
    fn default() -> Self {
        Self {
            time: 0.0,
            position: Vector3::zeros(),
            velocity: Vector3::zeros(),
            attitude: UnitQuaternion::identity(),
            omega: Vector3::zeros(),
        }
    }
}

impl RigidBodyState {
    pub fn at(position: Vector3<f64>) -> Self {
        Self {
            position,
            ..Self::default()
        }
    }

    pub fn velocity_body(&self) -> Vector3<f64> {
        self.attitude.inverse_transform_vector(&self.velocity)
    }

    /// (roll, pitch, yaw), Z-Y-X convention.
    pub fn euler(&self) -> (f64, f64, f64) {
        self.attitude.euler_angles()
    }

    pub fn is_finite(&self) -> bool {
        self.time.is_finite()
            && self.position.iter().all(|v| v.is_finite())
            && self.velocity.iter().all(|v| v.is_finite())
            && self.attitude.coords.iter().all(|v| v.is_finite())
            && self.omega.iter().all(|v| v.is_finite())
    }

    /// Translational plus rotational kinetic energy.
    pub fn kinetic_energy(&self, params: &VehicleParams) -> f64 {
        let j = params.inertia_matrix();
        0.5 * params.mass * self.velocity.norm_squared() + 0.5 * self.omega.dot(&(j * self.omega))
    }
}

#[derive(Clone, Copy)]
struct Deriv {
    dp: Vector3<f64>,
    dv: Vector3<f64>,
    dq: Quaternion<f64>,
    dw: Vector3<f64>,
}

struct Raw {
    p: Vector3<f64>,
    v: Vector3<f64>,
    q: Quaternion<f64>,
    w: Vector3<f64>,
}

impl Raw {
    fn offset(&self, d: &Deriv, h: f64) -> Raw {
        Raw {
            p: self.p + d.dp * h,
            v: self.v + d.dv * h,
            q: self.q + d.dq * h,
            w: self.w + d.dw * h,
        }
    }
}

struct Model {
    mass: f64,
    inertia: nalgebra::Matrix3<f64>,
    inertia_inv: nalgebra::Matrix3<f64>,
    gravity: Vector3<f64>,
}

impl Model {
    fn deriv(&self, s: &Raw, wrench: &Wrench) -> Deriv {
        // The unnormalized quaternion is rotated with its own norm removed so
        // the stage derivatives stay consistent.
        let q = UnitQuaternion::from_quaternion(s.q);
        let dv = q.transform_vector(&wrench.force) / self.mass + self.gravity;
        let omega_q = Quaternion::new(0.0, s.w.x, s.w.y, s.w.z);
        let dq = s.q * omega_q * 0.5;
        let dw = self.inertia_inv * (wrench.torque - s.w.cross(&(self.inertia * s.w)));
        Deriv {
            dp: s.v,
            dv,
            dq,
            dw,
        }
    }
}

/// Advance the state by `dt` under a body-frame wrench held constant over the
/// step, with gravity applied in the world frame. Classical RK4; the
/// quaternion is renormalized afterwards.
pub fn step_dynamics(
    params: &VehicleParams,
    state: &RigidBodyState,
    wrench: &Wrench,
    dt: f64,
) -> Result<RigidBodyState, SimError> {
    if !(dt > 0.0 && dt <= MAX_STEP) {
        return Err(SimError::InvalidStep(dt));
    }
    if !wrench.is_finite() {
        return Err(SimError::NonFinite("wrench"));
    }
    let inertia = params.inertia_matrix();
    let model = Model {
        mass: params.mass,
        inertia,
        inertia_inv: inertia.try_inverse().ok_or_else(|| {
            SimError::InvalidParams("inertia is singular".to_string())
        })?,
        gravity: params.gravity_vector(),
    };
    let s0 = Raw {
        p: state.position,
        v: state.velocity,
        q: *state.attitude.quaternion(),
        w: state.omega,
    };
    let k1 = model.deriv(&s0, wrench);
    let k2 = model.deriv(&s0.offset(&k1, dt / 2.0), wrench);
    let k3 = model.deriv(&s0.offset(&k2, dt / 2.0), wrench);
    let k4 = model.deriv(&s0.offset(&k3, dt), wrench);
    let c = dt / 6.0;
    let next = Raw {
        p: s0.p + (k1.dp + k2.dp * 2.0 + k3.dp * 2.0 + k4.dp) * c,
        v: s0.v + (k1.dv + k2.dv * 2.0 + k3.dv * 2.0 + k4.dv) * c,
        q: s0.q + (k1.dq + k2.dq * 2.0 + k3.dq * 2.0 + k4.dq) * c,
        w: s0.w + (k1.dw + k2.dw * 2.0 + k3.dw * 2.0 + k4.dw) * c,
    };
    let out = RigidBodyState {
        time: state.time + dt,
        position: next.p,
        velocity: next.v,
        attitude: UnitQuaternion::from_quaternion(next.q),
        omega: next.w,
    };
    if !out.is_finite() {
        return Err(SimError::NonFinite("state"));
    }
    Ok(out)
}
