//! Evaluation harness behind the command-line tool: the failure battery,
//! per-run reports, convergence analysis, synthetic detection streams,
//! one-shot allocation requests and SVG charts.

mod alloc_request;
mod battery;
mod convergence;
mod plot;
mod report;
mod synthetic;

use thiserror::Error;

pub use alloc_request::{AllocRequest, NamedFailure};
pub use battery::{battery_scenarios, battery_cases, BatteryCase, FAILURE_TIME, RUN_DURATION};
pub use convergence::{convergence_time, CONVERGENCE_SCALE_FLOOR, DEFAULT_BAND};
pub use plot::{parse_polylines, telemetry_charts, Chart, Series};
pub use report::{
    report_output, run_report, run_suite, DetectorFloors, OutputFormat, ReportOptions, RunReport, SuiteReport,
};
pub use synthetic::{detect_stream, synthetic_batch, SyntheticPlant, SyntheticStream};

use crate::alloc::AllocError;
use crate::detector::DetectorError;
use crate::sim::SimError;
use crate::telemetry::TelemetryError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{0}")]
    Io(String),
    #[error("cannot parse {what}: {message}")]
    Parse { what: String, message: String },
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Alloc(#[from] AllocError),
    #[error(transparent)]
    Detector(#[from] DetectorError),
    #[error(transparent)]
    Telemetry(#[from] TelemetryError),
}

impl HarnessError {
    pub(crate) fn io(path: &std::path::Path, e: impl std::fmt::Display) -> Self {
        HarnessError::Io(format!("{}: {e}", path.display()))
    }

    /// True when the error comes from malformed input rather than a failure
    /// while running.
    pub fn is_input_error(&self) -> bool {
        match self {
            HarnessError::Parse { .. } | HarnessError::Invalid(_) | HarnessError::MissingColumn(_) => true,
            HarnessError::Sim(e) => matches!(
                e,
                SimError::Parse(_)
                    | SimError::InvalidScenario(_)
                    | SimError::InvalidParams(_)
                    | SimError::UnknownActuator(_)
                    | SimError::Dimension { .. }
            ),
            HarnessError::Telemetry(e) => !matches!(e, TelemetryError::Io(_)),
            HarnessError::Detector(e) => matches!(
                e,
                DetectorError::MissingColumn(_) | DetectorError::NonMonotoneTime { .. } | DetectorError::InvalidParameter(_)
            ),
            HarnessError::Alloc(e) => !matches!(e, AllocError::Unrecoverable),
            HarnessError::Io(_) => false,
        }
    }
}
