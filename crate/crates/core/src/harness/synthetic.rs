//! First-order synthetic plants for exercising the detector away from the
//! simulator: `y(t) = a·y(t−1) + g(t−1)·b·u(t−1)` driven by white input, where
//! the input gain `g` drops from 1 to 0 at the fault sample.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::detector::{
    aggregate, evaluate_detections, ChannelSpec, DetectionEvent, DetectionMetrics, DetectorChannel, DetectorConfig,
    FaultWindow,
};
use crate::exec::{self, Execution};

use super::HarnessError;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticPlant {
    pub a: f64,
    pub b: f64,
    pub samples: usize,
    /// Sample at which the input gain drops to zero.
    pub fault_at: Option<usize>,
    /// Measurement noise standard deviation as a fraction of the RMS of the
    /// noise-free output.
    pub noise_fraction: f64,
}

impl Default for SyntheticPlant {
    fn default() -> Self {
        Self { a: 0.8, b: 0.5, samples: 1000, fault_at: None, noise_fraction: 0.01 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticStream {
    pub u: Vec<f64>,
    /// Measured output.
    pub y: Vec<f64>,
    pub fault_at: Option<usize>,
}

impl SyntheticPlant {
    pub fn generate(&self, seed: u64) -> SyntheticStream {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = self.samples;
        let u: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let mut clean = vec![0.0; n];
        for t in 1..n {
            let gain = match self.fault_at {
                Some(f) if t > f => 0.0,
                _ => 1.0,
            };
            clean[t] = self.a * clean[t - 1] + gain * self.b * u[t - 1];
        }
        let healthy = &clean[..self.fault_at.unwrap_or(n).min(n)];
        let rms = (healthy.iter().map(|v| v * v).sum::<f64>() / healthy.len().max(1) as f64).sqrt();
        let sigma = self.noise_fraction * rms;
        let y = clean
            .iter()
            .map(|v| {
                let e: f64 = StandardNormal.sample(&mut rng);
                v + sigma * e
            })
            .collect();
        SyntheticStream { u, y, fault_at: self.fault_at }
    }
}

/// Run one detector channel over a stream; event times are sample indices.
pub fn detect_stream(stream: &SyntheticStream, config: &DetectorConfig) -> Result<Vec<DetectionEvent>, HarnessError> {
    let mut channel = DetectorChannel::new(&ChannelSpec::new("synthetic", "u", "y"), config)?;
    let mut events = Vec::new();
    for (t, (&u, &y)) in stream.u.iter().zip(&stream.y).enumerate() {
        if let Some(e) = channel.step(u, y, t as f64)?.event {
            events.push(e);
        }
    }
    Ok(events)
}

/// `count` streams with faults in the even-numbered ones at staggered
/// samples, scored with a `tolerance`-sample window.
pub fn synthetic_batch(
    count: usize,
    seed: u64,
    config: &DetectorConfig,
    tolerance: f64,
    exec: Execution,
) -> Result<DetectionMetrics, HarnessError> {
    let parts = exec::map_range(exec, count, |i| {
        let fault_at = (i % 2 == 0).then_some(500 + 37 * i);
        let plant = SyntheticPlant { samples: 2000, fault_at, ..Default::default() };
        let stream = plant.generate(seed.wrapping_add(i as u64));
        let events = detect_stream(&stream, config)?;
        let windows: Vec<FaultWindow> = fault_at.map(|f| FaultWindow::from(f as f64)).into_iter().collect();
        Ok::<_, HarnessError>(evaluate_detections(&events, &windows, tolerance)?)
    });
    let parts: Vec<DetectionMetrics> = parts.into_iter().collect::<Result<_, _>>()?;
    Ok(aggregate(&parts))
}
