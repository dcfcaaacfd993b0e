use std::cmp::Ordering;

use log::warn;
use serde::Serialize;

use super::{ChannelSpec, DetectionEvent, DetectorChannel, DetectorConfig, DetectorError};
use crate::exec::{self, Execution};
use crate::telemetry::Telemetry;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub time: f64,
    pub y: f64,
    pub y_hat: Option<f64>,
    pub residual: Option<f64>,
    pub z: Option<f64>,
    pub alarmed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChannelTrace {
    pub channel: String,
    pub rows: Vec<TraceRow>,
    /// Rows dropped because a needed cell was not finite.
    pub skipped: usize,
}

impl ChannelTrace {
    /// Trace as a table with columns `time, y, y_hat, residual, z, alarmed`.
    pub fn to_telemetry(&self) -> Telemetry {
        let cols = ["time", "y", "y_hat", "residual", "z", "alarmed"];
        let mut t = Telemetry::new(cols.iter().map(|c| c.to_string()).collect()).expect("static header");
        for r in &self.rows {
            let opt = |v: Option<f64>| v.unwrap_or(f64::NAN);
            t.push_row(vec![r.time, r.y, opt(r.y_hat), opt(r.residual), opt(r.z), if r.alarmed { 1.0 } else { 0.0 }])
                .expect("fixed width");
        }
        t
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct OfflineResult {
    /// Ordered by `(time, channel)`.
    pub events: Vec<DetectionEvent>,
    /// One trace per channel spec, in spec order.
    pub traces: Vec<ChannelTrace>,
}

/// Replay every channel over a recorded log.
pub fn run_offline(
    log: &Telemetry,
    channels: &[ChannelSpec],
    config: &DetectorConfig,
    exec: Execution,
) -> Result<OfflineResult, DetectorError> {
    if log.columns().is_empty() && log.is_empty() {
        return Ok(OfflineResult::default());
    }
    let time_idx = log.index_of("time").ok_or_else(|| DetectorError::MissingColumn("time".into()))?;
    let mut prev = f64::NEG_INFINITY;
    for (row, r) in log.rows().iter().enumerate() {
        let t = r[time_idx];
        if t.is_nan() {
            continue;
        }
        if t < prev {
            return Err(DetectorError::NonMonotoneTime { row, prev, next: t });
        }
        prev = t;
    }
    let mut cols = Vec::with_capacity(channels.len());
    for spec in channels {
        let idx = |name: &str| log.index_of(name).ok_or_else(|| DetectorError::MissingColumn(name.to_string()));
        cols.push((idx(&spec.input)?, idx(&spec.output)?));
        DetectorChannel::new(spec, config)?;
    }

    let per_channel = exec::map_range(exec, channels.len(), |i| {
        replay_channel(log, &channels[i], config, time_idx, cols[i].0, cols[i].1)
    });

    let mut result = OfflineResult::default();
    for outcome in per_channel {
        let (trace, events) = outcome?;
        if trace.skipped > 0 {
            warn!("channel {}: skipped {} non-finite rows", trace.channel, trace.skipped);
        }
        result.traces.push(trace);
        result.events.extend(events);
    }
    result
        .events
        .sort_by(|a, b| a.time.partial_cmp(&b.time).unwrap_or(Ordering::Equal).then_with(|| a.channel.cmp(&b.channel)));
    Ok(result)
}

fn replay_channel(
    log: &Telemetry,
    spec: &ChannelSpec,
    config: &DetectorConfig,
    time_idx: usize,
    input_idx: usize,
    output_idx: usize,
) -> Result<(ChannelTrace, Vec<DetectionEvent>), DetectorError> {
    let mut channel = DetectorChannel::new(spec, config)?;
    let mut trace = ChannelTrace { channel: spec.name.clone(), rows: Vec::with_capacity(log.len()), skipped: 0 };
    let mut events = Vec::new();
    for row in log.rows() {
        let (t, u, y) = (row[time_idx], row[input_idx], row[output_idx]);
        if !(t.is_finite() && u.is_finite() && y.is_finite()) {
            trace.skipped += 1;
            continue;
        }
        let step = channel.step(u, y, t)?;
        let p = step.prediction;
        trace.rows.push(TraceRow {
            time: t,
            y,
            y_hat: p.map(|p| p.y_hat),
            residual: p.map(|p| p.residual),
            z: p.map(|p| p.z),
            alarmed: p.is_some_and(|p| p.alarmed),
        });
        events.extend(step.event);
    }
    Ok((trace, events))
}
