use thiserror::Error;

use crate::alloc::AllocError;
use crate::detector::DetectorError;
use crate::harness::HarnessError;
use crate::sim::SimError;
use crate::telemetry::TelemetryError;

/// Crate-level error, wrapping the error of whichever subsystem failed.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Detector(#[from] DetectorError),
    #[error(transparent)]
    Alloc(#[from] AllocError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error(transparent)]
    Telemetry(#[from] TelemetryError),
}

pub type Result<T> = std::result::Result<T, Error>;
