//! CSV series and SVG line charts from run directories.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::ppo::TracePoint;
use crate::reward::WEIGHT_NAMES;

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];
const MAX_POINTS: usize = 2000;

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

pub fn read_trace(path: &Path) -> Result<Vec<TracePoint>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(Error::from))
        .collect()
}

fn quantities() -> Vec<(String, Box<dyn Fn(&TracePoint) -> f64>)> {
    let mut q: Vec<(String, Box<dyn Fn(&TracePoint) -> f64>)> = vec![
        ("sum_rate_mbps".into(), Box::new(|p| p.sum_rate_mbps)),
        ("reward".into(), Box::new(|p| p.reward)),
    ];
    for (i, name) in WEIGHT_NAMES.iter().enumerate() {
        q.push((format!("weight_{name}"), Box::new(move |p| p.weights.get(i))));
    }
    q
}

/// One CSV and one SVG per tracked quantity, with every run overlaid.
/// Each directory must contain `trace.jsonl`.
pub fn emit_plots(run_dirs: &[PathBuf], out_dir: &Path) -> Result<Vec<PathBuf>> {
    if run_dirs.is_empty() {
        return Err(Error::Empty("run directories"));
    }
    let mut runs = Vec::new();
    for dir in run_dirs {
        let trace_path = dir.join("trace.jsonl");
        if !trace_path.is_file() {
            return Err(Error::MissingRunDir(dir.clone()));
        }
        let label = dir
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| dir.display().to_string());
        runs.push((label, read_trace(&trace_path)?));
    }
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut written = Vec::new();
    for (name, f) in quantities() {
        let series: Vec<Series> = runs
            .iter()
            .map(|(label, trace)| Series {
                label: label.clone(),
                points: trace.iter().map(|p| (p.step as f64, f(p))).collect(),
            })
            .collect();
        let csv_path = out_dir.join(format!("{name}.csv"));
        let mut w = csv::Writer::from_path(&csv_path)?;
        w.write_record(["run", "step", "value"])?;
        for s in &series {
            for (x, y) in &s.points {
                w.write_record([s.label.as_str(), &x.to_string(), &y.to_string()])?;
            }
        }
        w.flush().map_err(|e| Error::io(&csv_path, e))?;
        let svg_path = out_dir.join(format!("{name}.svg"));
        std::fs::write(&svg_path, line_chart(&name, &series)).map_err(|e| Error::io(&svg_path, e))?;
        written.push(csv_path);
        written.push(svg_path);
    }
    Ok(written)
}

/// Minimal standalone SVG line chart.
pub fn line_chart(title: &str, series: &[Series]) -> String {
    let (w, h, m) = (800.0, 400.0, 50.0);
    let all = series.iter().flat_map(|s| s.points.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in all.filter(|p| p.0.is_finite() && p.1.is_finite()) {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 - x0 < 1e-12 {
        x1 = x0 + 1.0;
    }
    if y1 - y0 < 1e-12 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let sx = |x: f64| m + (x - x0) / (x1 - x0) * (w - 2.0 * m);
    let sy = |y: f64| h - m - (y - y0) / (y1 - y0) * (h - 2.0 * m);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, w / 2.0, escape(title));
    let _ = writeln!(
        svg,
        r#"<path d="M{m} {m} V{} H{}" fill="none" stroke="black"/>"#,
        h - m,
        w - m
    );
    let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, m - 4.0, h - m, fmt_num(y0));
    let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, m - 4.0, m + 4.0, fmt_num(y1));
    let _ = writeln!(svg, r#"<text x="{m}" y="{}">{}</text>"#, h - m + 16.0, fmt_num(x0));
    let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, w - m, h - m + 16.0, fmt_num(x1));
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let stride = s.points.len().div_ceil(MAX_POINTS).max(1);
        let pts: Vec<String> = s
            .points
            .iter()
            .step_by(stride)
            .filter(|p| p.0.is_finite() && p.1.is_finite())
            .map(|&(x, y)| format!("{:.1},{:.1}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1" points="{}"/>"#,
            pts.join(" ")
        );
        let ly = m + 14.0 * i as f64;
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{ly}" fill="{color}" text-anchor="end">{}</text>"#,
            w - m - 4.0,
            escape(&s.label)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn fmt_num(v: f64) -> String {
    if v.abs() >= 1000.0 || v == v.trunc() {
        format!("{v:.0}")
    } else {
        format!("{v:.3}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
