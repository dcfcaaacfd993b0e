//! Vehicle description: rigid body, tilting rotors, control surfaces, wing.
//!
//! The default airframe is read from `config/vehicle_default.json`, which is
//! the only place its numbers live.

use nalgebra::{Matrix3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::alloc::ActuatorLayout;

use super::SimError;

const DEFAULT_VEHICLE: &str = include_str!("../../config/vehicle_default.json");

/// One tilting rotor. The rotor axis at tilt 0 is body +z; positive tilt turns
/// it about `tilt_axis` (right hand).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RotorParams {
    pub position: [f64; 3],
    pub tilt_axis: [f64; 3],
    /// +1 or -1: sign of the reaction torque along the rotor axis.
    pub spin: f64,
}

/// Control surface producing a pure moment `moment_per_rad * deflection * q`
/// with `q` the dynamic pressure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceParams {
    pub name: String,
    pub moment_per_rad: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AeroParams {
    pub air_density: f64,
    pub wing_area: f64,
    pub lift_coefficient_zero: f64,
    pub lift_slope: f64,
    pub drag_coefficient_zero: f64,
    pub induced_drag_factor: f64,
    /// Angle of attack is clamped to +-max_alpha before evaluating lift.
    pub max_alpha: f64,
}

/// Limits and first-order response shared by one class of actuator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActuatorClass {
    pub min: f64,
    pub max: f64,
    pub time_constant: f64,
    pub rate_limit: f64,
    /// Allocation weight on deviation from trim.
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleParams {
    pub mass: f64,
    /// Row-major body inertia, kg m^2.
    pub inertia: [[f64; 3]; 3],
    pub gravity: f64,
    pub rotors: Vec<RotorParams>,
    /// Thrust = k_f * u^2 for normalized motor command u.
    pub thrust_coefficient: f64,
    /// Reaction torque = k_m * u^2.
    pub drag_torque_coefficient: f64,
    pub surfaces: Vec<SurfaceParams>,
    pub aero: AeroParams,
    pub motor: ActuatorClass,
    pub tilt: ActuatorClass,
    pub surface: ActuatorClass,
}

impl Default for VehicleParams {
    fn default() -> Self {
        serde_json::from_str(DEFAULT_VEHICLE).expect("bundled vehicle config is valid")
    }
}

/// Actuator vector ordering: motors, then tilts, then surfaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActuatorKind {
    Motor(usize),
    Tilt(usize),
    Surface(usize),
}

impl VehicleParams {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::InvalidParams(m.to_string()));
        if !(self.mass > 0.0) || !self.mass.is_finite() {
            return bad("mass must be positive");
        }
        if !(self.gravity >= 0.0) {
            return bad("gravity must be non-negative");
        }
        let j = self.inertia_matrix();
        if !j.iter().all(|v| v.is_finite()) || (j - j.transpose()).amax() > 1e-12 {
            return bad("inertia must be finite and symmetric");
        }
        if j.cholesky().is_none() {
            return bad("inertia must be positive definite");
        }
        if self.rotors.is_empty() {
            return bad("at least one rotor is required");
        }
        for r in &self.rotors {
            let a = Vector3::from(r.tilt_axis);
            if !(a.norm() > 0.0) || !a.iter().all(|v| v.is_finite()) {
                return bad("rotor tilt axis must be a non-zero finite vector");
            }
            if !r.position.iter().all(|v| v.is_finite()) || !r.spin.is_finite() {
                return bad("rotor position and spin must be finite");
            }
        }
        if !(self.thrust_coefficient > 0.0) || !self.drag_torque_coefficient.is_finite() {
            return bad("thrust coefficient must be positive");
        }
        for class in [&self.motor, &self.tilt, &self.surface] {
            if !(class.min <= class.max) || !class.min.is_finite() || !class.max.is_finite() {
                return bad("actuator range must satisfy min <= max");
            }
            if !(class.time_constant > 0.0) || !(class.rate_limit > 0.0) || !(class.weight > 0.0) {
                return bad("time constant, rate limit and weight must be positive");
            }
        }
        if self.motor.min < 0.0 {
            return bad("motor commands cannot be negative");
        }
        let a = &self.aero;
        if !(a.air_density >= 0.0) || !(a.wing_area >= 0.0) || !(a.max_alpha > 0.0) {
            return bad("aero parameters out of range");
        }
        Ok(())
    }

    pub fn inertia_matrix(&self) -> Matrix3<f64> {
        let j = &self.inertia;
        Matrix3::new(
            j[0][0], j[0][1], j[0][2], j[1][0], j[1][1], j[1][2], j[2][0], j[2][1], j[2][2],
        )
    }

    pub fn gravity_vector(&self) -> Vector3<f64> {
        Vector3::new(0.0, 0.0, -self.gravity)
    }

    pub fn rotor_count(&self) -> usize {
        self.rotors.len()
    }

    pub fn actuator_count(&self) -> usize {
        2 * self.rotors.len() + self.surfaces.len()
    }

    pub fn kind(&self, index: usize) -> ActuatorKind {
        let n = self.rotors.len();
        if index < n {
            ActuatorKind::Motor(index)
        } else if index < 2 * n {
            ActuatorKind::Tilt(index - n)
        } else {
            ActuatorKind::Surface(index - 2 * n)
        }
    }

    pub fn class(&self, index: usize) -> &ActuatorClass {
        match self.kind(index) {
            ActuatorKind::Motor(_) => &self.motor,
            ActuatorKind::Tilt(_) => &self.tilt,
            ActuatorKind::Surface(_) => &self.surface,
        }
    }

    pub fn actuator_names(&self) -> Vec<String> {
        let n = self.rotors.len();
        (1..=n)
            .map(|i| format!("motor{i}"))
            .chain((1..=n).map(|i| format!("tilt{i}")))
            .chain(self.surfaces.iter().map(|s| s.name.clone()))
            .collect()
    }

    /// Unit thrust direction of rotor `i` at tilt angle `tilt`, body frame.
    pub fn rotor_axis(&self, i: usize, tilt: f64) -> Vector3<f64> {
        let axis = nalgebra::Unit::new_normalize(Vector3::from(self.rotors[i].tilt_axis));
        UnitQuaternion::from_axis_angle(&axis, tilt) * Vector3::z()
    }

    /// Motor command that makes all rotors, tilted to `tilt`, carry `force`
    /// along their axes in total.
    fn motor_for_total_thrust(&self, force: f64) -> f64 {
        let per = force.max(0.0) / self.rotors.len() as f64;
        (per / self.thrust_coefficient).sqrt()
    }

    /// Hover trim: rotors vertical, equal thrust carrying the weight, surfaces
    /// neutral.
    pub fn hover_trim(&self) -> Vec<f64> {
        let n = self.rotors.len();
        let m = self.motor_for_total_thrust(self.mass * self.gravity);
        let mut u = vec![0.0; self.actuator_count()];
        u[..n].fill(m);
        u
    }

    /// Level cruise trim at `speed`, solved on the full actuator model from
    /// [`Self::cruise_trim_estimate`].
    pub fn cruise_trim(&self, speed: f64) -> Vec<f64> {
        let (required, q) = super::trim::level_flight_requirement(self, speed);
        let seed = self.cruise_trim_estimate(speed);
        match super::trim::solve_trim(self, q, &required, &seed, &crate::alloc::FailureSet::none()) {
            Ok(t) => t.u,
            Err(_) => seed,
        }
    }

    /// Rotors tilted forward 90 degrees and pushing against wing drag at the
    /// angle of attack where lift carries the weight; surfaces neutral.
    pub fn cruise_trim_estimate(&self, speed: f64) -> Vec<f64> {
        let n = self.rotors.len();
        let tilt = std::f64::consts::FRAC_PI_2.clamp(self.tilt.min, self.tilt.max);
        let forward: f64 = (0..n).map(|i| self.rotor_axis(i, tilt).x).sum::<f64>() / n as f64;
        let drag = super::aero::level_flight_drag(self, speed);
        let m = self.motor_for_total_thrust(drag / forward.max(1e-6));
        let mut u = vec![0.0; self.actuator_count()];
        u[..n].fill(m.clamp(self.motor.min, self.motor.max));
        u[n..2 * n].fill(tilt);
        u
    }

    /// Box, trim and rate limits as an allocation layout.
    pub fn layout(&self, trim: &[f64]) -> Result<ActuatorLayout, SimError> {
        let count = self.actuator_count();
        if trim.len() != count {
            return Err(SimError::Dimension {
                what: "trim",
                expected: count,
                got: trim.len(),
            });
        }
        let classes: Vec<&ActuatorClass> = (0..count).map(|i| self.class(i)).collect();
        let layout = ActuatorLayout::new(
            self.actuator_names(),
            classes.iter().map(|c| c.min).collect(),
            classes.iter().map(|c| c.max).collect(),
            trim.iter()
                .zip(&classes)
                .map(|(t, c)| t.clamp(c.min, c.max))
                .collect(),
        )?;
        Ok(layout.with_rate_limit(classes.iter().map(|c| c.rate_limit).collect())?)
    }

    pub fn default_weights(&self) -> Vec<f64> {
        (0..self.actuator_count()).map(|i| self.class(i).weight).collect()
    }

    /// Finite-difference steps used when linearizing the actuator wrench.
    pub fn linearization_steps(&self) -> Vec<f64> {
        vec![1e-6; self.actuator_count()]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_config_is_valid() {
        let p = VehicleParams::default();
        p.validate().unwrap();
        assert_eq!(p.actuator_count(), 11);
        assert_eq!(p.actuator_names()[4], "tilt1");
        assert_eq!(p.actuator_names()[10], "elevator");
        assert_eq!(p.kind(9), ActuatorKind::Surface(1));
    }

    #[test]
    fn rotor_axis_tilts_forward() {
        let p = VehicleParams::default();
        for i in 0..4 {
            let z = p.rotor_axis(i, 0.0);
            assert!((z - Vector3::z()).norm() < 1e-12);
            let f = p.rotor_axis(i, std::f64::consts::FRAC_PI_2);
            assert!(f.x > 0.95 && f.z.abs() < 1e-12, "{f}");
        }
    }

    #[test]
    fn hover_trim_carries_weight() {
        let p = VehicleParams::default();
        let u = p.hover_trim();
        let thrust: f64 = u[..4].iter().map(|m| p.thrust_coefficient * m * m).sum();
        assert!((thrust - p.mass * p.gravity).abs() < 1e-9);
        assert!(u[0] > 0.5 && u[0] < 0.6);
    }

    #[test]
    fn layout_matches_classes() {
        let p = VehicleParams::default();
        let l = p.layout(&p.hover_trim()).unwrap();
        assert_eq!(l.u_max[0], 1.0);
        assert_eq!(l.rate_limit.as_ref().unwrap()[5], p.tilt.rate_limit);
        assert!(p.layout(&[0.0; 3]).is_err());
    }

    #[test]
    fn invalid_params_rejected() {
        let p = VehicleParams { mass: 0.0, ..Default::default() };
        assert!(p.validate().is_err());
        let mut p = VehicleParams::default();
        p.inertia[0][1] = 1.0;
        assert!(p.validate().is_err());
        let mut p = VehicleParams::default();
        p.tilt.min = 3.0;
        assert!(p.validate().is_err());
    }
}
