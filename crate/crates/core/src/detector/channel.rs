use serde::{Deserialize, Serialize};

use super::{ArxConfig, DetectorError, History, MonitorConfig, ResidualMonitor, RlsEstimator};

/// Estimator and alarm tuning shared by the channels of one detector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorConfig {
    pub arx: ArxConfig,
    pub forgetting: f64,
    pub cov_init: f64,
    pub monitor: MonitorConfig,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self { arx: ArxConfig::default(), forgetting: 0.995, cov_init: 1e6, monitor: MonitorConfig::default() }
    }
}

/// Which commanded/measured signal pair a channel watches.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelSpec {
    pub name: String,
    pub input: String,
    pub output: String,
    /// Per-channel override of the model orders.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arx: Option<ArxConfig>,
}

impl ChannelSpec {
    pub fn new(name: &str, input: &str, output: &str) -> Self {
        Self { name: name.into(), input: input.into(), output: output.into(), arx: None }
    }

    /// Roll, pitch and yaw channels: commanded body torque against measured
    /// body rate.
    pub fn attitude_defaults() -> Vec<Self> {
        vec![
            Self::new("roll", "tau_x_cmd", "p_meas"),
            Self::new("pitch", "tau_y_cmd", "q_meas"),
            Self::new("yaw", "tau_z_cmd", "r_meas"),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionEvent {
    /// Seconds since stream start.
    pub time: f64,
    pub channel: String,
    pub z_score: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub y_hat: f64,
    pub residual: f64,
    pub z: f64,
    pub alarmed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelStep {
    /// `None` while the lag buffers are still filling.
    pub prediction: Option<Prediction>,
    pub event: Option<DetectionEvent>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorChannel {
    name: String,
    input_signal: String,
    output_signal: String,
    estimator: RlsEstimator,
    monitor: ResidualMonitor,
    history: History,
}

impl DetectorChannel {
    pub fn new(spec: &ChannelSpec, config: &DetectorConfig) -> Result<Self, DetectorError> {
        let arx = spec.arx.unwrap_or(config.arx);
        Ok(Self {
            name: spec.name.clone(),
            input_signal: spec.input.clone(),
            output_signal: spec.output.clone(),
            estimator: RlsEstimator::new(arx, config.forgetting, config.cov_init)?,
            monitor: ResidualMonitor::new(config.monitor)?,
            history: History::new(arx),
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn input_signal(&self) -> &str {
        &self.input_signal
    }

    pub fn output_signal(&self) -> &str {
        &self.output_signal
    }

    pub fn estimator(&self) -> &RlsEstimator {
        &self.estimator
    }

    pub fn monitor(&self) -> &ResidualMonitor {
        &self.monitor
    }

    pub fn monitor_mut(&mut self) -> &mut ResidualMonitor {
        &mut self.monitor
    }

    /// Regressor → prediction → RLS update → residual monitor → history push.
    ///
    /// Non-finite samples are rejected before touching any state.
    pub fn step(&mut self, u: f64, y: f64, time: f64) -> Result<ChannelStep, DetectorError> {
        if !u.is_finite() || !y.is_finite() {
            return Err(DetectorError::NonFinite);
        }
        self.history.push_input(u);
        if !self.history.is_full() {
            self.history.push_output(y);
            return Ok(ChannelStep { prediction: None, event: None });
        }
        let phi = self.history.regressor()?;
        let y_hat = self.estimator.predict(&phi)?;
        let residual = self.estimator.update(&phi, y)?;
        let out = self.monitor.update(residual)?;
        self.history.push_output(y);

        let event = out.triggered.then(|| DetectionEvent {
            time,
            channel: self.name.clone(),
            z_score: out.z,
            residual,
        });
        Ok(ChannelStep {
            prediction: Some(Prediction { y_hat, residual, z: out.z, alarmed: out.alarmed }),
            event,
        })
    }
}
