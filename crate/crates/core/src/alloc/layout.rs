use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::AllocError;

/// Ordered actuator set with limits, trim and slew rates.
///
/// Units are per actuator: normalized command for motors, radians for tilts
/// and control surfaces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActuatorLayout {
    pub names: Vec<String>,
    pub u_min: Vec<f64>,
    pub u_max: Vec<f64>,
    pub u_trim: Vec<f64>,
    /// Maximum change per second; infinite when absent.
    #[serde(default)]
    pub rate_limit: Option<Vec<f64>>,
}

impl ActuatorLayout {
    pub fn new(names: Vec<String>, u_min: Vec<f64>, u_max: Vec<f64>, u_trim: Vec<f64>) -> Result<Self, AllocError> {
        let layout = Self { names, u_min, u_max, u_trim, rate_limit: None };
        layout.validate()?;
        Ok(layout)
    }

    pub fn with_rate_limit(mut self, rate_limit: Vec<f64>) -> Result<Self, AllocError> {
        self.rate_limit = Some(rate_limit);
        self.validate()?;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn trim(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.u_trim)
    }

    pub fn validate(&self) -> Result<(), AllocError> {
        let n = self.names.len();
        for (what, v) in [("u_min", &self.u_min), ("u_max", &self.u_max), ("u_trim", &self.u_trim)] {
            if v.len() != n {
                return Err(AllocError::Dimension { what, expected: n, got: v.len() });
            }
        }
        if let Some(rl) = &self.rate_limit {
            if rl.len() != n {
                return Err(AllocError::Dimension { what: "rate_limit", expected: n, got: rl.len() });
            }
            if rl.iter().any(|r| r.is_nan() || *r <= 0.0) {
                return Err(AllocError::InvalidLayout("rate limits must be positive".into()));
            }
        }
        for (i, name) in self.names.iter().enumerate() {
            if self.names[..i].contains(name) {
                return Err(AllocError::InvalidLayout(format!("duplicate actuator `{name}`")));
            }
            let (lo, hi, trim) = (self.u_min[i], self.u_max[i], self.u_trim[i]);
            if !(lo.is_finite() && hi.is_finite() && trim.is_finite()) {
                return Err(AllocError::NonFinite("actuator layout"));
            }
            if !(lo <= trim && trim <= hi) {
                return Err(AllocError::InvalidLayout(format!("`{name}`: trim {trim} outside [{lo}, {hi}]")));
            }
        }
        Ok(())
    }

    /// Layout restricted to `keep`, in that order.
    pub fn select(&self, keep: &[usize]) -> Self {
        let pick = |v: &Vec<f64>| keep.iter().map(|&i| v[i]).collect::<Vec<_>>();
        Self {
            names: keep.iter().map(|&i| self.names[i].clone()).collect(),
            u_min: pick(&self.u_min),
            u_max: pick(&self.u_max),
            u_trim: pick(&self.u_trim),
            rate_limit: self.rate_limit.as_ref().map(pick),
        }
    }
}
