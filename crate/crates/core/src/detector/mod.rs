//! Online fault detection on commanded/measured signal pairs.
//!
//! Each [`DetectorChannel`] keeps an ARX model of how its measured output
//! responds to its commanded input. The model is re-estimated every sample by
//! exponentially weighted recursive least squares; the one-step prediction
//! residual is standardized by running statistics and an alarm is raised when
//! the Z-score stays above threshold for a debounce window.

mod arx;
mod channel;
mod metrics;
mod monitor;
mod offline;
mod rls;

pub use arx::{ArxConfig, History};
pub use channel::{ChannelSpec, ChannelStep, DetectionEvent, DetectorChannel, DetectorConfig, Prediction};
pub use metrics::{aggregate, evaluate_detections, DetectionMetrics, FaultWindow};
pub use monitor::{MonitorConfig, MonitorOutput, ResidualMonitor};
pub use offline::{run_offline, ChannelTrace, OfflineResult, TraceRow};
pub use rls::RlsEstimator;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DetectorError {
    #[error("invalid ARX orders na={na}, nb={nb}: at least one lag is required")]
    EmptyModel { na: usize, nb: usize },
    #[error("history not yet filled ({have} of {need} samples)")]
    InsufficientHistory { have: usize, need: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("non-finite sample rejected")]
    NonFinite,
    #[error("invalid detector parameter: {0}")]
    InvalidParameter(String),
    #[error("telemetry column `{0}` not found")]
    MissingColumn(String),
    #[error("time column decreases at row {row} ({prev} -> {next})")]
    NonMonotoneTime { row: usize, prev: f64, next: f64 },
    #[error("fault windows overlap or are unsorted near t={0}")]
    OverlappingWindows(f64),
}
