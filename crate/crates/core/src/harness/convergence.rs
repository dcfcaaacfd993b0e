//! Settling time of the actuator commands after a failure.

use crate::telemetry::Telemetry;

/// Default band, as a fraction of each command's final mean.
pub const DEFAULT_BAND: f64 = 0.05;
/// Commands whose final mean is smaller than this in magnitude get a band
/// relative to this value instead, so a command settling at zero can
/// converge.
pub const CONVERGENCE_SCALE_FLOOR: f64 = 0.1;
const FINAL_WINDOW: f64 = 1.0;

/// Seconds after `injection` from which every `u_sp_*` command stays within
/// `band` of its mean over the last second of the log. `None` when the log
/// has no commands, does not cover the injection, or is shorter than the
/// averaging window past it.
pub fn convergence_time(log: &Telemetry, injection: f64, band: f64) -> Option<f64> {
    let time = log.column("time")?;
    let cols: Vec<usize> = log
        .columns()
        .iter()
        .enumerate()
        .filter(|(_, c)| c.starts_with("u_sp_"))
        .map(|(i, _)| i)
        .collect();
    let (&first, &last) = (time.first()?, time.last()?);
    if cols.is_empty() || !(band > 0.0) || injection < first || last - injection < FINAL_WINDOW {
        return None;
    }
    let time_idx = log.index_of("time")?;
    let tail: Vec<&Vec<f64>> = log.rows().iter().filter(|r| r[time_idx] >= last - FINAL_WINDOW).collect();
    let bands: Vec<(usize, f64, f64)> = cols
        .iter()
        .map(|&c| {
            let vals: Vec<f64> = tail.iter().map(|r| r[c]).filter(|v| v.is_finite()).collect();
            let mean = vals.iter().sum::<f64>() / vals.len().max(1) as f64;
            (c, mean, band * mean.abs().max(CONVERGENCE_SCALE_FLOOR))
        })
        .collect();

    let rows = log.rows();
    let outside = |r: &Vec<f64>| bands.iter().any(|&(c, mean, w)| r[c].is_finite() && (r[c] - mean).abs() > w);
    let settled_from = match rows.iter().rposition(outside) {
        None => first,
        Some(k) if k + 1 < rows.len() => rows[k + 1][time_idx],
        Some(_) => return None,
    };
    Some((settled_from - injection).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn log(samples: impl Fn(f64) -> Vec<f64>, count: usize, dt: f64) -> Telemetry {
        let width = samples(0.0).len();
        let mut cols = vec!["time".to_string()];
        cols.extend((0..width).map(|i| format!("u_sp_a{i}")));
        cols.push("pos_x".into());
        let mut t = Telemetry::new(cols).unwrap();
        for k in 0..count {
            let time = k as f64 * dt;
            let mut row = vec![time];
            row.extend(samples(time));
            row.push(time.sin() * 100.0);
            t.push_row(row).unwrap();
        }
        t
    }

    #[test]
    fn constant_commands_converge_at_once() {
        let t = log(|_| vec![0.4, -1.0], 3000, 0.01);
        assert_eq!(convergence_time(&t, 10.0, DEFAULT_BAND), Some(0.0));
    }

    #[test]
    fn exponential_settles_after_three_time_constants() {
        let injection = 5.0;
        let tau = 2.0;
        let t = log(|time| vec![if time < injection { 0.0 } else { 1.0 - (-(time - injection) / tau).exp() }], 10_001, 0.01);
        let got = convergence_time(&t, injection, DEFAULT_BAND).unwrap();
        let exact = tau * 20f64.ln();
        assert!((got - exact).abs() <= 0.011, "{got} vs {exact}");
    }

    #[test]
    fn zero_final_value_uses_the_floor() {
        let t = log(|time| vec![if time < 12.0 { 0.5 } else { 0.001 * (time * 7.0).sin() }], 3000, 0.01);
        let got = convergence_time(&t, 10.0, DEFAULT_BAND).unwrap();
        assert!((got - 2.0).abs() < 0.011, "{got}");
    }

    #[test]
    fn undefined_cases() {
        let t = log(|_| vec![1.0], 300, 0.01);
        assert_eq!(convergence_time(&t, 2.5, DEFAULT_BAND), None);
        assert_eq!(convergence_time(&t, -1.0, DEFAULT_BAND), None);
        let bare = Telemetry::new(vec!["time".into()]).unwrap();
        assert_eq!(convergence_time(&bare, 0.0, DEFAULT_BAND), None);
        // Still moving in the final sample.
        let t = log(|time| vec![if time > 2.985 { 5.0 } else { 1.0 }], 300, 0.01);
        assert_eq!(convergence_time(&t, 0.5, DEFAULT_BAND), None);
    }
}
