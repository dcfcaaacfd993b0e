use serde::{Deserialize, Serialize};

use super::DetectorError;

/// Alarm policy and residual-statistics tuning.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MonitorConfig {
    /// EWMA smoothing of the residual mean and variance.
    pub smoothing: f64,
    /// Lower clamp on the residual standard deviation.
    pub sigma_floor: f64,
    pub z_threshold: f64,
    /// Consecutive over-threshold samples required to alarm.
    pub debounce: u32,
    /// Residuals absorbed before alarms are allowed.
    pub warmup_samples: u64,
}

impl Default for MonitorConfig {
    fn default() -> Self {
        Self { smoothing: 0.999, sigma_floor: 1e-6, z_threshold: 5.0, debounce: 3, warmup_samples: 200 }
    }
}

impl MonitorConfig {
    pub fn validate(&self) -> Result<(), DetectorError> {
        let bad = |msg: &str| Err(DetectorError::InvalidParameter(msg.to_string()));
        if !(self.smoothing > 0.0 && self.smoothing < 1.0) {
            return bad("smoothing must lie in (0, 1)");
        }
        if !(self.sigma_floor > 0.0 && self.sigma_floor.is_finite()) {
            return bad("sigma_floor must be positive");
        }
        if !(self.z_threshold > 0.0 && self.z_threshold.is_finite()) {
            return bad("z_threshold must be positive");
        }
        if self.debounce == 0 {
            return bad("debounce must be at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonitorOutput {
    pub z: f64,
    /// Alarm condition currently holds.
    pub alarmed: bool,
    /// This call moved the monitor into the alarmed state.
    pub triggered: bool,
}

/// Running residual statistics with a debounced Z-score alarm.
///
/// The mean and variance start as cumulative averages and blend into an
/// exponentially weighted estimate once `count` exceeds `1 / (1 - smoothing)`.
/// Warm residuals whose |z| is at or above threshold are not absorbed.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualMonitor {
    config: MonitorConfig,
    mean: f64,
    var: f64,
    count: u64,
    over_count: u32,
    alarmed: bool,
}

impl ResidualMonitor {
    pub fn new(config: MonitorConfig) -> Result<Self, DetectorError> {
        config.validate()?;
        Ok(Self { config, mean: 0.0, var: 0.0, count: 0, over_count: 0, alarmed: false })
    }

    /// A monitor that is already warm with the given statistics.
    pub fn with_statistics(config: MonitorConfig, mean: f64, var: f64, count: u64) -> Result<Self, DetectorError> {
        let mut m = Self::new(config)?;
        if !(var >= 0.0 && mean.is_finite()) {
            return Err(DetectorError::InvalidParameter("variance must be non-negative".into()));
        }
        m.mean = mean;
        m.var = var;
        m.count = count;
        Ok(m)
    }

    pub fn config(&self) -> &MonitorConfig {
        &self.config
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn var(&self) -> f64 {
        self.var
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn is_warm(&self) -> bool {
        self.count >= self.config.warmup_samples
    }

    pub fn is_alarmed(&self) -> bool {
        self.alarmed
    }

    /// Clear the alarm latch, keeping the learned statistics.
    pub fn reset(&mut self) {
        self.over_count = 0;
        self.alarmed = false;
    }

    pub fn z_score(&self, residual: f64) -> f64 {
        (residual - self.mean) / self.var.sqrt().max(self.config.sigma_floor)
    }

    pub fn update(&mut self, residual: f64) -> Result<MonitorOutput, DetectorError> {
        if !residual.is_finite() {
            return Err(DetectorError::NonFinite);
        }
        let z = self.z_score(residual);
        let warm = self.is_warm();
        let over = warm && z.abs() >= self.config.z_threshold;

        let was_alarmed = self.alarmed;
        if over {
            self.over_count = self.over_count.saturating_add(1);
            self.alarmed = self.over_count >= self.config.debounce;
        } else {
            self.over_count = 0;
            self.alarmed = false;
            self.absorb(residual);
        }
        Ok(MonitorOutput { z, alarmed: self.alarmed, triggered: self.alarmed && !was_alarmed })
    }

    fn absorb(&mut self, residual: f64) {
        self.count += 1;
        let w = (1.0 - self.config.smoothing).max(1.0 / self.count as f64);
        let diff = residual - self.mean;
        self.mean += w * diff;
        self.var = (1.0 - w) * (self.var + w * diff * diff);
    }
}
