//! Trim points: actuator vectors producing a required wrench on the full
//! nonlinear actuator model, found by repeated linearize-and-allocate steps.

use nalgebra::{DVector, Vector3};

use crate::alloc::{allocate, linearize_effectiveness, AllocationProblem, FailureSet, Wrench};

use super::aero::{aero_wrench, dynamic_pressure, wrench_from_actuators};
use super::params::{ActuatorKind, VehicleParams};
use super::SimError;

/// Healthy motors are linearized no lower than this.
const MOTOR_FLOOR: f64 = 0.05;
const MAX_ITERATIONS: usize = 200;
const RESIDUAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct Trim {
    pub u: Vec<f64>,
    /// `|wrench(u) - required|` at the returned point.
    pub residual: f64,
    pub iterations: usize,
}

/// Actuator vector near `anchor` whose wrench at dynamic pressure `q` equals
/// `required`, with `failures` held at their forced values. Returns the best
/// point found when no exact one is reachable.
pub fn solve_trim(
    params: &VehicleParams,
    q: f64,
    required: &Wrench,
    anchor: &[f64],
    failures: &FailureSet,
) -> Result<Trim, SimError> {
    let n = params.actuator_count();
    if anchor.len() != n {
        return Err(SimError::Dimension {
            what: "trim anchor",
            expected: n,
            got: anchor.len(),
        });
    }
    let layout = params.layout(anchor)?;
    failures.validate(&layout)?;
    let weights = DVector::from_vec(params.default_weights());
    let steps = params.linearization_steps();
    let model = |u: &[f64]| wrench_from_actuators(params, u, q);
    let residual = |u: &[f64]| (model(u) - *required).norm();

    let mut u: Vec<f64> = anchor.to_vec();
    for &(i, mode) in &failures.entries {
        u[i] = mode.forced_value();
    }
    let mut res = residual(&u);
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let lin: Vec<f64> = (0..n)
            .map(|i| match (params.kind(i), failures.mode_of(i)) {
                (ActuatorKind::Motor(_), None) => u[i].max(MOTOR_FLOOR),
                _ => u[i],
            })
            .collect();
        let matrix = linearize_effectiveness(model, &lin, &steps)?;
        let desired = (*required - model(&lin)).to_dvector();
        let mut problem = AllocationProblem::new(matrix, desired, layout.clone(), weights.clone());
        problem.failures = failures.clone();
        problem.fallback_row_weights = [1.0, 1.0, 1.0, 20.0, 20.0, 20.0];
        let target = allocate(&problem)?.u_sp;

        // Backtrack until the wrench error drops; once it is negligible the
        // full step only moves along the null space.
        let mut alpha = 1.0;
        let mut next = target.clone();
        let mut next_res = residual(&next);
        while next_res >= res && res > RESIDUAL_TOL && alpha > 1e-6 {
            alpha *= 0.5;
            next = u.iter().zip(&target).map(|(a, b)| a + alpha * (b - a)).collect();
            next_res = residual(&next);
        }
        if next_res > res && res > RESIDUAL_TOL {
            break;
        }
        let step = next.iter().zip(&u).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        u = next;
        res = next_res;
        if res <= RESIDUAL_TOL && step < 1e-9 {
            break;
        }
    }
    Ok(Trim {
        u,
        residual: res,
        iterations,
    })
}

/// Wrench the actuators must supply for steady level flight at `speed` along
/// body x, wings level.
pub fn level_flight_requirement(params: &VehicleParams, speed: f64) -> (Wrench, f64) {
    let v = Vector3::new(speed, 0.0, 0.0);
    let weight = Wrench::new(Vector3::new(0.0, 0.0, params.mass * params.gravity), Vector3::zeros());
    (weight - aero_wrench(params, &v), dynamic_pressure(params, &v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alloc::FailureMode;

    #[test]
    fn hover_trim_is_a_fixed_point() {
        let p = VehicleParams::default();
        let (req, q) = level_flight_requirement(&p, 0.0);
        let t = solve_trim(&p, q, &req, &p.hover_trim(), &FailureSet::none()).unwrap();
        assert!(t.residual < 1e-10);
        for (a, b) in t.u.iter().zip(p.hover_trim()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn motor_out_hover_has_an_exact_trim() {
        let p = VehicleParams::default();
        let (req, q) = level_flight_requirement(&p, 0.0);
        let failures = FailureSet::new(vec![(0, FailureMode::Cutoff)]);
        let t = solve_trim(&p, q, &req, &p.hover_trim(), &failures).unwrap();
        assert!(t.residual < 1e-8, "{}", t.residual);
        assert_eq!(t.u[0], 0.0);
        // The diagonal pair carries the weight.
        assert!(t.u[2] > 0.7 && t.u[3] > 0.7);
    }

    #[test]
    fn cruise_trim_balances_thrust_moment() {
        let p = VehicleParams::default();
        let t = p.cruise_trim(18.0);
        let (req, q) = level_flight_requirement(&p, 18.0);
        assert!((wrench_from_actuators(&p, &t, q) - req).norm() < 1e-8);
    }
}
