use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{ActuatorLayout, AllocError, EffectivenessMatrix};

/// How a failed actuator behaves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FailureMode {
    /// Output forced to zero, which is the no-effect value of every actuator
    /// kind in this crate (zero rotor command, zero surface deflection).
    Cutoff,
    /// Held at the given value regardless of command.
    Locked(f64),
}

impl FailureMode {
    pub fn forced_value(&self) -> f64 {
        match *self {
            FailureMode::Cutoff => 0.0,
            FailureMode::Locked(v) => v,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FailureSet {
    pub entries: Vec<(usize, FailureMode)>,
}

impl FailureSet {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn new(entries: Vec<(usize, FailureMode)>) -> Self {
        Self { entries }
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn mode_of(&self, index: usize) -> Option<FailureMode> {
        self.entries.iter().find(|(i, _)| *i == index).map(|(_, m)| *m)
    }

    pub fn validate(&self, layout: &ActuatorLayout) -> Result<(), AllocError> {
        for (k, &(i, mode)) in self.entries.iter().enumerate() {
            if i >= layout.len() {
                return Err(AllocError::InvalidFailure(format!("actuator index {i} out of range")));
            }
            if self.entries[..k].iter().any(|(j, _)| *j == i) {
                return Err(AllocError::InvalidFailure(format!("actuator {i} listed twice")));
            }
            if let FailureMode::Locked(v) = mode {
                if !(v >= layout.u_min[i] && v <= layout.u_max[i]) {
                    return Err(AllocError::InvalidFailure(format!(
                        "`{}` locked at {v}, outside [{}, {}]",
                        layout.names[i], layout.u_min[i], layout.u_max[i]
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Allocation problem over the healthy actuators only.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedProblem {
    pub matrix: EffectivenessMatrix,
    /// Desired wrench deviation minus the failed actuators' contribution.
    pub desired: DVector<f64>,
    pub layout: ActuatorLayout,
    /// Full index of each reduced column.
    pub healthy: Vec<usize>,
    /// Full index and forced value of each failed actuator.
    pub forced: Vec<(usize, f64)>,
    pub full_len: usize,
}

impl ReducedProblem {
    /// Full-length setpoint with failed entries pinned to their forced values.
    pub fn reinflate(&self, reduced: &DVector<f64>) -> DVector<f64> {
        assert_eq!(reduced.len(), self.healthy.len(), "reduced solution length");
        let mut full = DVector::zeros(self.full_len);
        for (k, &i) in self.healthy.iter().enumerate() {
            full[i] = reduced[k];
        }
        for &(i, v) in &self.forced {
            full[i] = v;
        }
        full
    }

    pub fn reduce(&self, full: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.healthy.len(), self.healthy.iter().map(|&i| full[i]))
    }
}

/// Drop failed columns and charge their forced deviation to the wrench.
pub fn reconfigure_for_failure(
    matrix: &EffectivenessMatrix,
    desired: &DVector<f64>,
    layout: &ActuatorLayout,
    failures: &FailureSet,
) -> Result<ReducedProblem, AllocError> {
    let n = layout.len();
    if matrix.ncols() != n {
        return Err(AllocError::Dimension { what: "effectiveness columns", expected: n, got: matrix.ncols() });
    }
    if desired.len() != 6 {
        return Err(AllocError::Dimension { what: "desired wrench", expected: 6, got: desired.len() });
    }
    failures.validate(layout)?;
    if failures.entries.len() == n {
        return Err(AllocError::Unrecoverable);
    }

    let mut adjusted = desired.clone();
    let mut forced = Vec::with_capacity(failures.entries.len());
    for &(i, mode) in &failures.entries {
        let value = mode.forced_value();
        let deviation = value - matrix.linearization_point[i];
        adjusted.axpy(-deviation, &matrix.matrix.column(i), 1.0);
        forced.push((i, value));
    }
    forced.sort_by_key(|(i, _)| *i);

    let healthy: Vec<usize> = (0..n).filter(|i| failures.mode_of(*i).is_none()).collect();
    let b = DMatrix::from_fn(6, healthy.len(), |r, c| matrix.matrix[(r, healthy[c])]);
    let lin = DVector::from_iterator(healthy.len(), healthy.iter().map(|&i| matrix.linearization_point[i]));
    Ok(ReducedProblem {
        matrix: EffectivenessMatrix::new(b, lin)?,
        desired: adjusted,
        layout: layout.select(&healthy),
        healthy,
        forced,
        full_len: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup(n: usize) -> (EffectivenessMatrix, ActuatorLayout) {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let b = DMatrix::from_fn(6, n, |_, _| rng.random_range(-1.0..1.0));
        let trim: Vec<f64> = (0..n).map(|i| 0.1 * i as f64).collect();
        let names = (0..n).map(|i| format!("a{i}")).collect();
        let layout = ActuatorLayout::new(names, vec![-1.0; n], vec![1.0; n], trim.clone()).unwrap();
        (EffectivenessMatrix::new(b, DVector::from_vec(trim)).unwrap(), layout)
    }

    #[test]
    fn no_failures_is_identity() {
        let (b, layout) = setup(5);
        let dw = DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let red = reconfigure_for_failure(&b, &dw, &layout, &FailureSet::none()).unwrap();
        assert_eq!(red.matrix, b);
        assert_eq!(red.desired, dw);
    }

    #[test]
    fn cutoff_at_zero_trim_only_drops_the_column() {
        let (b, layout) = setup(5);
        let dw = DVector::from_vec(vec![1.0, 0.0, 0.0, 0.0, 0.0, -1.0]);
        let red = reconfigure_for_failure(&b, &dw, &layout, &FailureSet::new(vec![(0, FailureMode::Cutoff)])).unwrap();
        assert_eq!(red.desired, dw);
        assert_eq!(red.matrix.ncols(), 4);
        assert_eq!(red.healthy, vec![1, 2, 3, 4]);
    }

    #[test]
    fn locked_actuator_charges_its_wrench() {
        let (b, layout) = setup(5);
        let dw = DVector::zeros(6);
        let red = reconfigure_for_failure(&b, &dw, &layout, &FailureSet::new(vec![(2, FailureMode::Locked(0.7))])).unwrap();
        let expected = -(b.matrix.column(2) * (0.7 - 0.2));
        assert!((red.desired - expected).amax() < 1e-15);
    }

    #[test]
    fn reinflate_round_trip() {
        let (b, layout) = setup(5);
        let fs = FailureSet::new(vec![(3, FailureMode::Locked(-0.5)), (1, FailureMode::Cutoff)]);
        let red = reconfigure_for_failure(&b, &DVector::zeros(6), &layout, &fs).unwrap();
        let full = DVector::from_vec(vec![0.1, 0.2, 0.3, 0.4, 0.5]);
        let back = red.reinflate(&red.reduce(&full));
        assert_eq!(back[0], 0.1);
        assert_eq!(back[2], 0.3);
        assert_eq!(back[4], 0.5);
        assert_eq!(back[1], 0.0);
        assert_eq!(back[3], -0.5);
    }

    #[test]
    fn invalid_failure_sets() {
        let (b, layout) = setup(2);
        let dw = DVector::zeros(6);
        let all = FailureSet::new(vec![(0, FailureMode::Cutoff), (1, FailureMode::Cutoff)]);
        assert_eq!(reconfigure_for_failure(&b, &dw, &layout, &all), Err(AllocError::Unrecoverable));
        let out_of_range = FailureSet::new(vec![(7, FailureMode::Cutoff)]);
        assert!(reconfigure_for_failure(&b, &dw, &layout, &out_of_range).is_err());
        let too_far = FailureSet::new(vec![(0, FailureMode::Locked(3.0))]);
        assert!(reconfigure_for_failure(&b, &dw, &layout, &too_far).is_err());
        let dup = FailureSet::new(vec![(0, FailureMode::Cutoff), (0, FailureMode::Locked(0.0))]);
        assert!(reconfigure_for_failure(&b, &dw, &layout, &dup).is_err());
    }
}
