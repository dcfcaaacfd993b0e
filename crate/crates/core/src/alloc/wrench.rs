use std::ops::{Add, Sub};

use nalgebra::{DMatrix, DVector, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use super::AllocError;

/// Body-frame force (N) and torque (N·m).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Wrench {
    pub force: Vector3<f64>,
    pub torque: Vector3<f64>,
}

impl Wrench {
    pub fn new(force: Vector3<f64>, torque: Vector3<f64>) -> Self {
        Self { force, torque }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    /// `[fx, fy, fz, tx, ty, tz]`
    pub fn to_vector(&self) -> Vector6<f64> {
        Vector6::new(self.force.x, self.force.y, self.force.z, self.torque.x, self.torque.y, self.torque.z)
    }

    pub fn to_dvector(&self) -> DVector<f64> {
        DVector::from_column_slice(self.to_vector().as_slice())
    }

    pub fn from_slice(v: &[f64]) -> Self {
        Self { force: Vector3::new(v[0], v[1], v[2]), torque: Vector3::new(v[3], v[4], v[5]) }
    }

    pub fn is_finite(&self) -> bool {
        self.force.iter().chain(self.torque.iter()).all(|v| v.is_finite())
    }

    pub fn norm(&self) -> f64 {
        self.to_vector().norm()
    }
}

impl Add for Wrench {
    type Output = Wrench;
    fn add(self, rhs: Wrench) -> Wrench {
        Wrench::new(self.force + rhs.force, self.torque + rhs.torque)
    }
}

impl Sub for Wrench {
    type Output = Wrench;
    fn sub(self, rhs: Wrench) -> Wrench {
        Wrench::new(self.force - rhs.force, self.torque - rhs.torque)
    }
}

/// Linearized map from actuator deviation to body wrench.
///
/// Rows are `[fx, fy, fz, tx, ty, tz]`, columns follow the actuator layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectivenessMatrix {
    pub matrix: DMatrix<f64>,
    /// Actuator vector about which `matrix` was computed.
    pub linearization_point: DVector<f64>,
}

impl EffectivenessMatrix {
    pub fn new(matrix: DMatrix<f64>, linearization_point: DVector<f64>) -> Result<Self, AllocError> {
        if matrix.nrows() != 6 {
            return Err(AllocError::Dimension { what: "effectiveness rows", expected: 6, got: matrix.nrows() });
        }
        if matrix.ncols() != linearization_point.len() {
            return Err(AllocError::Dimension {
                what: "linearization point",
                expected: matrix.ncols(),
                got: linearization_point.len(),
            });
        }
        if matrix.iter().chain(linearization_point.iter()).any(|v| !v.is_finite()) {
            return Err(AllocError::NonFinite("effectiveness matrix"));
        }
        Ok(Self { matrix, linearization_point })
    }

    pub fn ncols(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn column(&self, j: usize) -> Wrench {
        Wrench::from_slice(self.matrix.column(j).as_slice())
    }

    /// `B · (u − u_lin)`
    pub fn apply(&self, u: &DVector<f64>) -> Wrench {
        let w = &self.matrix * (u - &self.linearization_point);
        Wrench::from_slice(w.as_slice())
    }
}

/// Central-difference Jacobian of `model` at `u0`.
pub fn linearize_effectiveness<F>(model: F, u0: &[f64], steps: &[f64]) -> Result<EffectivenessMatrix, AllocError>
where
    F: Fn(&[f64]) -> Wrench,
{
    if steps.len() != u0.len() {
        return Err(AllocError::Dimension { what: "step sizes", expected: u0.len(), got: steps.len() });
    }
    if let Some((index, &value)) = steps.iter().enumerate().find(|(_, h)| !(**h > 0.0 && h.is_finite())) {
        return Err(AllocError::InvalidStep { index, value });
    }
    let n = u0.len();
    let mut b = DMatrix::zeros(6, n);
    let mut probe = u0.to_vec();
    for j in 0..n {
        let h = steps[j];
        probe[j] = u0[j] + h;
        let plus = model(&probe);
        probe[j] = u0[j] - h;
        let minus = model(&probe);
        probe[j] = u0[j];
        if !plus.is_finite() || !minus.is_finite() {
            return Err(AllocError::NonFinite("wrench model evaluation"));
        }
        let col = (plus.to_vector() - minus.to_vector()) / (2.0 * h);
        b.set_column(j, &col);
    }
    EffectivenessMatrix::new(b, DVector::from_column_slice(u0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn exact_on_linear_models() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = DMatrix::from_fn(6, 5, |_, _| rng.random_range(-3.0..3.0));
        let trim = [0.1, 0.5, -0.2, 0.9, 0.0];
        let model = |u: &[f64]| {
            let d = DVector::from_fn(5, |i, _| u[i] - trim[i]);
            Wrench::from_slice((&m * d).as_slice())
        };
        for h in [1e-4, 0.1, 3.0] {
            let b = linearize_effectiveness(model, &trim, &[h; 5]).unwrap();
            assert!((&b.matrix - &m).amax() < 1e-9, "h = {h}");
        }
    }

    #[test]
    fn symmetric_quadratic_has_zero_slope_at_origin() {
        let model = |u: &[f64]| Wrench::new(Vector3::new(u[0] * u[0], 0.0, 0.0), Vector3::zeros());
        let b = linearize_effectiveness(model, &[0.0], &[1e-3]).unwrap();
        assert!(b.matrix[(0, 0)].abs() < 1e-6);
    }

    #[test]
    fn rejects_bad_steps_and_non_finite_models() {
        let model = |_: &[f64]| Wrench::zero();
        assert!(matches!(linearize_effectiveness(model, &[0.0], &[0.0]), Err(AllocError::InvalidStep { .. })));
        let blowup = |u: &[f64]| Wrench::new(Vector3::new(1.0 / u[0], 0.0, 0.0), Vector3::zeros());
        assert!(linearize_effectiveness(blowup, &[0.0], &[1.0]).is_ok());
        let nan = |_: &[f64]| Wrench::new(Vector3::new(f64::NAN, 0.0, 0.0), Vector3::zeros());
        assert!(matches!(linearize_effectiveness(nan, &[0.0], &[1.0]), Err(AllocError::NonFinite(_))));
    }
}
