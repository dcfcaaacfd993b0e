//! Per-run reports and the suite runner.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::detector::{aggregate, evaluate_detections, DetectionEvent, DetectionMetrics, FaultWindow};
use crate::exec::{self, Execution};
use crate::sim::{run_scenario, RunOutput, Scenario};
use crate::telemetry::Telemetry;

use super::convergence::{convergence_time, DEFAULT_BAND};
use super::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl OutputFormat {
    pub fn extension(self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        }
    }

    pub fn write_table(self, table: &Telemetry, path: &Path) -> Result<(), HarnessError> {
        let file = File::create(path).map_err(|e| HarnessError::io(path, e))?;
        let w = BufWriter::new(file);
        match self {
            OutputFormat::Csv => table.write_csv(w)?,
            OutputFormat::Json => table.write_json(w)?,
        }
        Ok(())
    }
}

impl FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(format!("unknown format {other:?}, expected csv or json")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportOptions {
    pub out_dir: PathBuf,
    pub format: OutputFormat,
    /// Convergence band as a fraction of the final command.
    pub band: f64,
    /// Seconds after a failure within which a detection counts.
    pub detection_tolerance: f64,
}

impl ReportOptions {
    pub fn new(out_dir: impl Into<PathBuf>) -> Self {
        Self { out_dir: out_dir.into(), format: OutputFormat::Csv, band: DEFAULT_BAND, detection_tolerance: 2.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: String,
    pub informed: bool,
    pub detector: DetectionMetrics,
    pub detections: Vec<DetectionEvent>,
    pub crashed: bool,
    pub max_attitude_error_deg: f64,
    /// Settling time of the actuator commands after the failure; absent when
    /// there was no failure or the run ended too soon to tell.
    pub convergence_time: Option<f64>,
    pub artifacts: Vec<PathBuf>,
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<(), HarnessError> {
    let file = File::create(path).map_err(|e| HarnessError::io(path, e))?;
    serde_json::to_writer_pretty(BufWriter::new(file), value).map_err(|e| HarnessError::io(path, e))
}

/// Score a finished run and write its telemetry and summary under the
/// output directory.
pub fn report_output(scenario: &Scenario, out: &RunOutput, opts: &ReportOptions) -> Result<RunReport, HarnessError> {
    fs::create_dir_all(&opts.out_dir).map_err(|e| HarnessError::io(&opts.out_dir, e))?;
    let name = &scenario.name;
    let telemetry_path = opts.out_dir.join(
        scenario.output.telemetry.clone().unwrap_or_else(|| format!("{name}.{}", opts.format.extension())),
    );
    let summary_path =
        opts.out_dir.join(scenario.output.summary.clone().unwrap_or_else(|| format!("{name}_summary.json")));
    opts.format.write_table(&out.telemetry, &telemetry_path)?;
    write_json(&out.summary, &summary_path)?;

    let s = &out.summary;
    let windows: Vec<FaultWindow> = s.failure_time.map(FaultWindow::from).into_iter().collect();
    let detector = evaluate_detections(&s.detections, &windows, opts.detection_tolerance)?;
    let convergence = if s.crashed { None } else { s.failure_time.and_then(|t| convergence_time(&out.telemetry, t, opts.band)) };
    Ok(RunReport {
        scenario: name.clone(),
        informed: s.informed,
        detector,
        detections: s.detections.clone(),
        crashed: s.crashed,
        max_attitude_error_deg: s.max_attitude_error_deg,
        convergence_time: convergence,
        artifacts: vec![telemetry_path, summary_path],
    })
}

/// Run one scenario and report on it.
pub fn run_report(scenario: &Scenario, opts: &ReportOptions) -> Result<RunReport, HarnessError> {
    let out = run_scenario(scenario)?;
    report_output(scenario, &out, opts)
}

/// Minimum pooled detector scores a suite must reach; unset floors are not
/// checked, and a score that is undefined for the suite never fails.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorFloors {
    pub accuracy: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
}

impl DetectorFloors {
    fn violations(&self, m: &DetectionMetrics) -> Vec<String> {
        [("accuracy", self.accuracy, m.accuracy()), ("precision", self.precision, m.precision()), ("recall", self.recall, m.recall())]
            .into_iter()
            .filter_map(|(what, floor, got)| match (floor, got) {
                (Some(f), Some(g)) if g < f => Some(format!("detector {what} {g:.3} below floor {f:.3}")),
                _ => None,
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    /// Ordered by scenario name.
    pub reports: Vec<RunReport>,
    pub detector: DetectionMetrics,
    pub floors: DetectorFloors,
    /// Reasons the suite failed; empty when it passed.
    pub problems: Vec<String>,
    pub passed: bool,
}

/// Run every scenario, possibly concurrently, and write `suite_report.json`
/// to the output directory. The suite fails when an informed run crashes or
/// a pooled detector score is below its floor.
pub fn run_suite(
    scenarios: &[Scenario],
    opts: &ReportOptions,
    exec: Execution,
    floors: DetectorFloors,
) -> Result<SuiteReport, HarnessError> {
    let mut names: Vec<&str> = scenarios.iter().map(|s| s.name.as_str()).collect();
    names.sort_unstable();
    if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
        return Err(HarnessError::Invalid(format!("duplicate scenario name {:?}", w[0])));
    }
    let mut reports = exec::map(exec, scenarios, |s| run_report(s, opts)).into_iter().collect::<Result<Vec<_>, _>>()?;
    reports.sort_by(|a, b| a.scenario.cmp(&b.scenario));

    let detector = aggregate(reports.iter().map(|r| &r.detector));
    let mut problems: Vec<String> =
        reports.iter().filter(|r| r.informed && r.crashed).map(|r| format!("{} crashed", r.scenario)).collect();
    problems.extend(floors.violations(&detector));
    let suite = SuiteReport { reports, detector, floors, passed: problems.is_empty(), problems };
    write_json(&suite, &opts.out_dir.join("suite_report.json"))?;
    Ok(suite)
}
