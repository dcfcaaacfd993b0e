//! Detection scoring over labeled fault windows.
//!
//! Counting convention, per sequence (one flight or scenario):
//!
//! - each fault window is a true positive if an event falls inside
//!   `[start, start + tolerance]` (the first such event sets the latency),
//!   otherwise a false negative;
//! - every event outside all windows is a false positive;
//! - a sequence without windows and without events is a true negative;
//! - a sequence is correct when it has no false positive and no false
//!   negative.
//!
//! Accuracy is correct sequences over all sequences, precision is
//! `TP / (TP + FP)` and recall is `TP / (TP + FN)`.

use serde::{Deserialize, Serialize};

use super::{DetectionEvent, DetectorError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FaultWindow {
    pub start: f64,
    /// Open-ended when `None`.
    #[serde(default)]
    pub end: Option<f64>,
}

impl FaultWindow {
    pub fn from(start: f64) -> Self {
        Self { start, end: None }
    }

    fn contains(&self, t: f64) -> bool {
        t >= self.start && self.end.is_none_or(|e| t <= e)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DetectionMetrics {
    pub sequences: usize,
    pub correct_sequences: usize,
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub true_negatives: usize,
    /// Detection latencies of the true positives, seconds.
    pub latencies: Vec<f64>,
}

impl DetectionMetrics {
    pub fn accuracy(&self) -> Option<f64> {
        ratio(self.correct_sequences, self.sequences)
    }

    pub fn precision(&self) -> Option<f64> {
        ratio(self.true_positives, self.true_positives + self.false_positives)
    }

    pub fn recall(&self) -> Option<f64> {
        ratio(self.true_positives, self.true_positives + self.false_negatives)
    }

    pub fn mean_latency(&self) -> Option<f64> {
        (!self.latencies.is_empty()).then(|| self.latencies.iter().sum::<f64>() / self.latencies.len() as f64)
    }

    pub fn max_latency(&self) -> Option<f64> {
        self.latencies.iter().copied().reduce(f64::max)
    }
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// Score the events of one sequence against its fault windows.
pub fn evaluate_detections(
    events: &[DetectionEvent],
    windows: &[FaultWindow],
    tolerance: f64,
) -> Result<DetectionMetrics, DetectorError> {
    for pair in windows.windows(2) {
        let prev_end = pair[0].end.unwrap_or(f64::INFINITY);
        if pair[1].start < pair[0].start || pair[1].start <= prev_end {
            return Err(DetectorError::OverlappingWindows(pair[1].start));
        }
    }
    let mut m = DetectionMetrics { sequences: 1, ..Default::default() };
    for w in windows {
        let first = events
            .iter()
            .map(|e| e.time)
            .filter(|&t| t >= w.start && t <= w.start + tolerance)
            .reduce(f64::min);
        match first {
            Some(t) => {
                m.true_positives += 1;
                m.latencies.push(t - w.start);
            }
            None => m.false_negatives += 1,
        }
    }
    m.false_positives = events
        .iter()
        .filter(|e| !windows.iter().any(|w| w.contains(e.time) || (e.time >= w.start && e.time <= w.start + tolerance)))
        .count();
    if windows.is_empty() && events.is_empty() {
        m.true_negatives = 1;
    }
    if m.false_positives == 0 && m.false_negatives == 0 {
        m.correct_sequences = 1;
    }
    Ok(m)
}

/// Pool per-sequence metrics.
pub fn aggregate<'a>(parts: impl IntoIterator<Item = &'a DetectionMetrics>) -> DetectionMetrics {
    parts.into_iter().fold(DetectionMetrics::default(), |mut acc, m| {
        acc.sequences += m.sequences;
        acc.correct_sequences += m.correct_sequences;
        acc.true_positives += m.true_positives;
        acc.false_positives += m.false_positives;
        acc.false_negatives += m.false_negatives;
        acc.true_negatives += m.true_negatives;
        acc.latencies.extend_from_slice(&m.latencies);
        acc
    })
}
