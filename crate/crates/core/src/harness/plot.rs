//! Static SVG line charts of telemetry.
//!
//! Polyline points are written in data coordinates, with shortest
//! round-trip float formatting, and mapped to the canvas by a transform on
//! the enclosing group. Reading the points back therefore recovers the
//! plotted values exactly.

use std::fmt::Write;

use crate::telemetry::Telemetry;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 360.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 40.0;
const TICKS: usize = 5;
const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    });
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi - lo <= f64::EPSILON * lo.abs().max(1.0) {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

impl Chart {
    pub fn to_svg(&self) -> String {
        let (x0, x1) = range(self.series.iter().flat_map(|s| s.x.iter().copied()));
        let (y0, y1) = range(self.series.iter().flat_map(|s| s.y.iter().copied()));
        let pw = WIDTH - LEFT - RIGHT;
        let ph = HEIGHT - TOP - BOTTOM;
        let sx = pw / (x1 - x0);
        let sy = ph / (y1 - y0);
        let px = |x: f64| LEFT + (x - x0) * sx;
        let py = |y: f64| TOP + (y1 - y) * sy;

        let mut out = String::new();
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
        );
        let _ = writeln!(out, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
        let _ = writeln!(out, r#"<text x="{}" y="18" font-size="14" text-anchor="middle">{}</text>"#, LEFT + pw / 2.0, escape(&self.title));
        let _ = writeln!(out, r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="dimgray"/>"#);
        for i in 0..=TICKS {
            let f = i as f64 / TICKS as f64;
            let xv = x0 + f * (x1 - x0);
            let yv = y0 + f * (y1 - y0);
            let _ = writeln!(
                out,
                r#"<line x1="{0}" y1="{1}" x2="{0}" y2="{2}" stroke="gainsboro"/><text x="{0}" y="{3}" text-anchor="middle">{4}</text>"#,
                px(xv),
                TOP,
                TOP + ph,
                TOP + ph + 14.0,
                tick(xv)
            );
            let _ = writeln!(
                out,
                r#"<line x1="{0}" y1="{1}" x2="{2}" y2="{1}" stroke="gainsboro"/><text x="{3}" y="{4}" text-anchor="end">{5}</text>"#,
                LEFT,
                py(yv),
                LEFT + pw,
                LEFT - 4.0,
                py(yv) + 4.0,
                tick(yv)
            );
        }
        let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, LEFT + pw / 2.0, HEIGHT - 6.0, escape(&self.x_label));
        let _ = writeln!(
            out,
            r#"<text transform="translate(14 {}) rotate(-90)" text-anchor="middle">{}</text>"#,
            TOP + ph / 2.0,
            escape(&self.y_label)
        );

        // data -> canvas: (x, y) -> (LEFT + (x - x0) sx, TOP + (y1 - y) sy)
        let _ = writeln!(
            out,
            r#"<g transform="matrix({sx} 0 0 {} {} {})" fill="none" stroke-width="1.5">"#,
            -sy,
            LEFT - x0 * sx,
            TOP + y1 * sy
        );
        for (k, s) in self.series.iter().enumerate() {
            let color = PALETTE[k % PALETTE.len()];
            for run in finite_runs(s) {
                let _ = write!(out, r#"<polyline data-series="{}" stroke="{color}" vector-effect="non-scaling-stroke" points=""#, escape(&s.label));
                for (i, (x, y)) in run.iter().enumerate() {
                    let sep = if i == 0 { "" } else { " " };
                    let _ = write!(out, "{sep}{x},{y}");
                }
                let _ = writeln!(out, r#""/>"#);
            }
        }
        let _ = writeln!(out, "</g>");
        for (k, s) in self.series.iter().enumerate() {
            let color = PALETTE[k % PALETTE.len()];
            let y = TOP + 10.0 + 16.0 * k as f64;
            let x = LEFT + pw + 10.0;
            let _ = writeln!(
                out,
                r#"<line x1="{x}" y1="{y}" x2="{}" y2="{y}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
                x + 18.0,
                x + 22.0,
                y + 4.0,
                escape(&s.label)
            );
        }
        out.push_str("</svg>\n");
        out
    }
}

fn tick(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.to_string() }
}

/// Maximal runs of consecutive points with both coordinates finite.
fn finite_runs(s: &Series) -> Vec<Vec<(f64, f64)>> {
    let mut runs = Vec::new();
    let mut cur = Vec::new();
    for (&x, &y) in s.x.iter().zip(&s.y) {
        if x.is_finite() && y.is_finite() {
            cur.push((x, y));
        } else if !cur.is_empty() {
            runs.push(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        runs.push(cur);
    }
    runs
}

/// Points of every polyline in an SVG written by [`Chart::to_svg`], with the
/// series label, in document order.
pub fn parse_polylines(svg: &str) -> Vec<(String, Vec<(f64, f64)>)> {
    let attr = |tag: &str, name: &str| -> Option<String> {
        let key = format!("{name}=\"");
        let start = tag.find(&key)? + key.len();
        let end = tag[start..].find('"')? + start;
        Some(tag[start..end].to_string())
    };
    svg.split("<polyline")
        .skip(1)
        .filter_map(|rest| {
            let tag = &rest[..rest.find("/>")?];
            let label = attr(tag, "data-series")?.replace("&quot;", "\"").replace("&lt;", "<").replace("&gt;", ">").replace("&amp;", "&");
            let points = attr(tag, "points")?
                .split_whitespace()
                .filter_map(|p| {
                    let (x, y) = p.split_once(',')?;
                    Some((x.parse().ok()?, y.parse().ok()?))
                })
                .collect();
            Some((label, points))
        })
        .collect()
}

fn time_series(log: &Telemetry, time: &[f64], prefix: &str, strip: bool) -> Vec<Series> {
    log.columns()
        .iter()
        .filter(|c| c.starts_with(prefix))
        .map(|c| Series {
            label: if strip { c[prefix.len()..].to_string() } else { c.clone() },
            x: time.to_vec(),
            y: log.column(c).expect("listed column"),
        })
        .collect()
}

/// Charts of the detector Z-scores, actuator commands, attitude and ground
/// track, keyed by a file stem. Charts whose columns are absent are skipped.
pub fn telemetry_charts(log: &Telemetry) -> Vec<(String, Chart)> {
    let Some(time) = log.column("time") else {
        return Vec::new();
    };
    let mut charts = Vec::new();
    let mut push = |stem: &str, title: &str, x_label: &str, y_label: &str, series: Vec<Series>| {
        if !series.is_empty() {
            charts.push((
                stem.to_string(),
                Chart { title: title.into(), x_label: x_label.into(), y_label: y_label.into(), series },
            ));
        }
    };
    push("zscore", "Detector Z-score", "time (s)", "z", time_series(log, &time, "z_", true));
    push("actuators", "Actuator commands", "time (s)", "command", time_series(log, &time, "u_sp_", true));
    let attitude = ["roll_deg", "pitch_deg", "yaw_deg"]
        .iter()
        .filter_map(|c| Some(Series { label: c.trim_end_matches("_deg").into(), x: time.clone(), y: log.column(c)? }))
        .collect();
    push("attitude", "Attitude", "time (s)", "angle (deg)", attitude);
    if let (Some(x), Some(y)) = (log.column("pos_x"), log.column("pos_y")) {
        push("path", "Ground track", "east (m)", "north (m)", vec![Series { label: "path".into(), x, y }]);
    }
    charts
}
