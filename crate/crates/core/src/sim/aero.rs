//! Forces and moments: actuator wrench and wing aerodynamics, body frame.

use nalgebra::Vector3;

use crate::alloc::Wrench;

use super::params::VehicleParams;

/// Dynamic pressure for a body-frame airspeed.
pub fn dynamic_pressure(params: &VehicleParams, v_body: &Vector3<f64>) -> f64 {
    0.5 * params.aero.air_density * v_body.norm_squared()
}

/// Wrench produced by the actuator vector `u` (motors, tilts, surfaces) at
/// dynamic pressure `q`. Rotors and surfaces only; the wing is separate.
pub fn wrench_from_actuators(params: &VehicleParams, u: &[f64], q: f64) -> Wrench {
    let n = params.rotors.len();
    debug_assert_eq!(u.len(), params.actuator_count());
    let mut force = Vector3::zeros();
    let mut torque = Vector3::zeros();
    for (i, rotor) in params.rotors.iter().enumerate() {
        let m = u[i].max(0.0);
        let axis = params.rotor_axis(i, u[n + i]);
        let thrust = params.thrust_coefficient * m * m;
        let f = axis * thrust;
        force += f;
        torque += Vector3::from(rotor.position).cross(&f);
        torque += axis * (rotor.spin * params.drag_torque_coefficient * m * m);
    }
    for (s, surface) in params.surfaces.iter().enumerate() {
        torque += Vector3::from(surface.moment_per_rad) * (u[2 * n + s] * q);
    }
    Wrench::new(force, torque)
}

/// Wing lift and drag for a body-frame airspeed. Lift lies in the body x-z
/// plane, perpendicular to the airspeed; drag opposes it.
pub fn aero_wrench(params: &VehicleParams, v_body: &Vector3<f64>) -> Wrench {
    let a = &params.aero;
    let speed = v_body.norm();
    if speed < 1e-3 || a.wing_area == 0.0 {
        return Wrench::zero();
    }
    let q = dynamic_pressure(params, v_body);
    let alpha = angle_of_attack(v_body).clamp(-a.max_alpha, a.max_alpha);
    let cl = a.lift_coefficient_zero + a.lift_slope * alpha;
    let cd = a.drag_coefficient_zero + a.induced_drag_factor * cl * cl;
    let drag = -v_body / speed * (q * a.wing_area * cd);
    let vxz = (v_body.x * v_body.x + v_body.z * v_body.z).sqrt();
    let lift = if vxz > 1e-6 {
        // airspeed direction in x-z rotated a quarter turn upward
        Vector3::new(-v_body.z, 0.0, v_body.x) / vxz * (q * a.wing_area * cl * vxz / speed)
    } else {
        Vector3::zeros()
    };
    Wrench::new(lift + drag, Vector3::zeros())
}

/// Angle of attack with body x forward and z up.
pub fn angle_of_attack(v_body: &Vector3<f64>) -> f64 {
    (-v_body.z).atan2(v_body.x)
}

/// Drag in level flight at `speed` with the angle of attack that makes lift
/// equal weight (clamped to the stall limit).
pub fn level_flight_drag(params: &VehicleParams, speed: f64) -> f64 {
    let a = &params.aero;
    let q = 0.5 * a.air_density * speed * speed;
    if q * a.wing_area <= 0.0 {
        return 0.0;
    }
    let cl_needed = params.mass * params.gravity / (q * a.wing_area);
    let cl_max = a.lift_coefficient_zero + a.lift_slope * a.max_alpha;
    let cl_min = a.lift_coefficient_zero - a.lift_slope * a.max_alpha;
    let cl = cl_needed.clamp(cl_min, cl_max);
    q * a.wing_area * (a.drag_coefficient_zero + a.induced_drag_factor * cl * cl)
}
