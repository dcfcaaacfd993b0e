use std::collections::VecDeque;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::DetectorError;

/// Lag structure of an ARX model `y(t) = Σ a_i y(t-i) + Σ b_j u(t-nk-j)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArxConfig {
    pub na: usize,
    pub nb: usize,
    pub nk: usize,
}

impl Default for ArxConfig {
    fn default() -> Self {
        Self { na: 2, nb: 2, nk: 1 }
    }
}

impl ArxConfig {
    pub fn new(na: usize, nb: usize, nk: usize) -> Result<Self, DetectorError> {
        let cfg = Self { na, nb, nk };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), DetectorError> {
        if self.na + self.nb == 0 {
            return Err(DetectorError::EmptyModel { na: self.na, nb: self.nb });
        }
        Ok(())
    }

    /// Number of model coefficients.
    pub fn order(&self) -> usize {
        self.na + self.nb
    }

    /// Samples needed before the first regressor can be formed.
    pub fn fill_len(&self) -> usize {
        self.na.max(self.nb + self.nk)
    }
}

/// Lagged outputs and inputs of one channel, most recent first.
///
/// The input buffer holds `nb + nk` samples including the current one, the
/// output buffer holds the last `na` outputs (not the current one).
#[derive(Debug, Clone, PartialEq)]
pub struct History {
    config: ArxConfig,
    outputs: VecDeque<f64>,
    inputs: VecDeque<f64>,
}

impl History {
    pub fn new(config: ArxConfig) -> Self {
        Self {
            config,
            outputs: VecDeque::with_capacity(config.na),
            inputs: VecDeque::with_capacity(config.nb + config.nk),
        }
    }

    pub fn config(&self) -> ArxConfig {
        self.config
    }

    pub fn push_input(&mut self, u: f64) {
        let cap = self.config.nb + self.config.nk;
        if cap == 0 {
            return;
        }
        if self.inputs.len() == cap {
            self.inputs.pop_back();
        }
        self.inputs.push_front(u);
    }

    pub fn push_output(&mut self, y: f64) {
        let cap = self.config.na;
        if cap == 0 {
            return;
        }
        if self.outputs.len() == cap {
            self.outputs.pop_back();
        }
        self.outputs.push_front(y);
    }

    pub fn is_full(&self) -> bool {
        self.outputs.len() == self.config.na && self.inputs.len() == self.config.nb + self.config.nk
    }

    /// `φ = [y(t-1)..y(t-na), u(t-nk)..u(t-nk-nb+1)]`.
    pub fn regressor(&self) -> Result<DVector<f64>, DetectorError> {
        if !self.is_full() {
            return Err(DetectorError::InsufficientHistory {
                have: self.outputs.len().min(self.inputs.len()),
                need: self.config.fill_len(),
            });
        }
        let nk = self.config.nk;
        let phi = self
            .outputs
            .iter()
            .copied()
            .chain(self.inputs.iter().skip(nk).copied())
            .collect::<Vec<_>>();
        Ok(DVector::from_vec(phi))
    }

    pub fn clear(&mut self) {
        self.outputs.clear();
        self.inputs.clear();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn history(cfg: ArxConfig, outputs_oldest_first: &[f64], inputs_oldest_first: &[f64]) -> History {
        let mut h = History::new(cfg);
        for &y in outputs_oldest_first {
            h.push_output(y);
        }
        for &u in inputs_oldest_first {
            h.push_input(u);
        }
        h
    }

    #[test]
    fn first_order_regressor() {
        let h = history(ArxConfig::new(1, 1, 0).unwrap(), &[2.0], &[3.0]);
        assert_eq!(h.regressor().unwrap().as_slice(), &[2.0, 3.0]);
    }

    #[test]
    fn pure_dead_time_fir() {
        // u(t-1) = 5, u(t) = 9
        let h = history(ArxConfig::new(0, 1, 1).unwrap(), &[], &[5.0, 9.0]);
        assert_eq!(h.regressor().unwrap().as_slice(), &[5.0]);
    }

    #[test]
    fn ordering_is_most_recent_first() {
        // y history [1, 2] and u history [3, 4], most recent first.
        let h = history(ArxConfig::new(2, 2, 0).unwrap(), &[2.0, 1.0], &[4.0, 3.0]);
        assert_eq!(h.regressor().unwrap().as_slice(), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn partial_history_is_an_error() {
        let h = history(ArxConfig::default(), &[1.0], &[1.0, 2.0]);
        assert!(matches!(h.regressor(), Err(DetectorError::InsufficientHistory { need: 3, .. })));
    }

    #[test]
    fn buffers_hold_exactly_the_configured_lags() {
        let cfg = ArxConfig::new(2, 3, 2).unwrap();
        let mut h = History::new(cfg);
        for i in 0..20 {
            h.push_input(i as f64);
            h.push_output(-(i as f64));
        }
        assert_eq!(h.inputs.len(), 5);
        assert_eq!(h.outputs.len(), 2);
        assert_eq!(h.regressor().unwrap().as_slice(), &[-19.0, -18.0, 17.0, 16.0, 15.0]);
    }

    #[test]
    fn empty_model_rejected() {
        assert!(ArxConfig::new(0, 0, 3).is_err());
    }
}
