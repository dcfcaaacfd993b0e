//! One-shot allocation problems read from JSON.
//!
//! ```json
//! {
//!   "B": [[...], ...],
//!   "dw": [fx, fy, fz, tx, ty, tz],
//!   "layout": {"names": [...], "u_min": [...], "u_max": [...], "u_trim": [...]},
//!   "R": [...],
//!   "failures": [{"actuator": "motor1", "mode": "cutoff"}]
//! }
//! ```
//!
//! `R` defaults to ones and the linearization point to the trim. `previous`
//! and `dt` together enable slew limiting when the layout has rate limits.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::alloc::{
    allocate, ActuatorLayout, AllocationProblem, AllocationResult, EffectivenessMatrix, FailureMode, FailureSet, RateLimit,
};

use super::HarnessError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedFailure {
    pub actuator: String,
    pub mode: FailureMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AllocRequest {
    /// Effectiveness matrix, six rows of one entry per actuator.
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
    pub dw: Vec<f64>,
    pub layout: ActuatorLayout,
    #[serde(rename = "R", default, skip_serializing_if = "Option::is_none")]
    pub r: Option<Vec<f64>>,
    #[serde(default)]
    pub failures: Vec<NamedFailure>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub linearization_point: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub previous: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub row_mask: Option<[bool; 6]>,
}

impl AllocRequest {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        serde_json::from_str(text).map_err(|e| HarnessError::Parse { what: "allocation problem".into(), message: e.to_string() })
    }

    pub fn problem(&self) -> Result<AllocationProblem, HarnessError> {
        let n = self.layout.len();
        if self.b.len() != 6 {
            return Err(HarnessError::Invalid(format!("B has {} rows, expected 6", self.b.len())));
        }
        if let Some(row) = self.b.iter().find(|r| r.len() != n) {
            return Err(HarnessError::Invalid(format!("B row has {} entries, expected {n}", row.len())));
        }
        if self.dw.len() != 6 {
            return Err(HarnessError::Invalid(format!("dw has {} entries, expected 6", self.dw.len())));
        }
        let b = DMatrix::from_fn(6, n, |r, c| self.b[r][c]);
        let lin = self.linearization_point.as_deref().unwrap_or(&self.layout.u_trim);
        let matrix = EffectivenessMatrix::new(b, DVector::from_column_slice(lin))?;
        let weights = DVector::from_vec(self.r.clone().unwrap_or_else(|| vec![1.0; n]));
        let mut problem = AllocationProblem::new(matrix, DVector::from_column_slice(&self.dw), self.layout.clone(), weights);
        let mut entries = Vec::with_capacity(self.failures.len());
        for f in &self.failures {
            let i = self.layout.index_of(&f.actuator).ok_or_else(|| HarnessError::Invalid(format!("unknown actuator {:?}", f.actuator)))?;
            entries.push((i, f.mode));
        }
        problem.failures = FailureSet::new(entries);
        match (&self.previous, self.dt) {
            (Some(prev), Some(dt)) => {
                problem.rate = Some(RateLimit { previous: DVector::from_column_slice(prev), dt });
            }
            (None, None) => {}
            _ => return Err(HarnessError::Invalid("`previous` and `dt` must be given together".into())),
        }
        problem.row_mask = self.row_mask;
        Ok(problem)
    }

    pub fn solve(&self) -> Result<AllocationResult, HarnessError> {
        Ok(allocate(&self.problem()?)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_effectiveness_echoes_the_wrench() {
        let text = r#"{
            "B": [[1,0,0,0,0,0],[0,1,0,0,0,0],[0,0,1,0,0,0],[0,0,0,1,0,0],[0,0,0,0,1,0],[0,0,0,0,0,1]],
            "dw": [0.1, -0.2, 0.3, 0.0, 0.05, -0.05],
            "layout": {"names": ["a","b","c","d","e","f"], "u_min": [-1,-1,-1,-1,-1,-1],
                       "u_max": [1,1,1,1,1,1], "u_trim": [0.5,0,0,0,0,0.1]}
        }"#;
        let r = AllocRequest::from_json(text).unwrap().solve().unwrap();
        let expect = [0.6, -0.2, 0.3, 0.0, 0.05, 0.05];
        for (u, e) in r.u_sp.iter().zip(expect) {
            assert!((u - e).abs() < 1e-12, "{u} vs {e}");
        }
        assert!(!r.fallback);
    }

    #[test]
    fn malformed_and_inconsistent_requests() {
        assert!(matches!(AllocRequest::from_json("{"), Err(HarnessError::Parse { .. })));
        let short = r#"{"B": [[1]], "dw": [0,0,0,0,0,0],
            "layout": {"names": ["a"], "u_min": [-1], "u_max": [1], "u_trim": [0]}}"#;
        let err = AllocRequest::from_json(short).unwrap().solve().unwrap_err();
        assert!(err.is_input_error());
    }

    #[test]
    fn named_failures_are_resolved() {
        let text = r#"{
            "B": [[1,1],[0,0],[0,0],[0,0],[0,0],[0,0]],
            "dw": [0.4,0,0,0,0,0],
            "layout": {"names": ["a","b"], "u_min": [-1,-1], "u_max": [1,1], "u_trim": [0,0]},
            "failures": [{"actuator": "a", "mode": {"locked": 0.1}}]
        }"#;
        let r = AllocRequest::from_json(text).unwrap().solve().unwrap();
        assert!((r.u_sp[0] - 0.1).abs() < 1e-12);
        assert!((r.u_sp[1] - 0.3).abs() < 1e-12);
    }
}
