//! Minimal SVG line charts from aggregate CSVs (`round,engine,mean,stderr`).

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Deserialize;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 60.0;
/// Points kept per series after thinning.
const MAX_POINTS: usize = 400;
const COLORS: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf",
];

#[derive(Deserialize)]
struct Row {
    round: usize,
    engine: String,
    mean: f64,
    stderr: f64,
}

struct Series {
    name: String,
    rows: Vec<Row>,
}

fn read(path: &Path) -> Result<Series, csv::Error> {
    let mut rows: Vec<Row> = csv::Reader::from_path(path)?
        .deserialize()
        .collect::<Result<_, _>>()?;
    let name = rows
        .first()
        .map_or_else(|| path.display().to_string(), |r| r.engine.clone());
    let step = rows.len().div_ceil(MAX_POINTS).max(1);
    let last = rows.len().saturating_sub(1);
    let mut k = 0;
    rows.retain(|_| {
        let keep = k % step == 0 || k == last;
        k += 1;
        keep
    });
    Ok(Series { name, rows })
}

/// One line per CSV with a ±stderr band.
pub fn render(inputs: &[PathBuf], output: &Path, y_label: &str) -> Result<(), csv::Error> {
    let series: Vec<Series> = inputs.iter().map(|p| read(p)).collect::<Result<_, _>>()?;
    let x_max = series
        .iter()
        .flat_map(|s| s.rows.iter().map(|r| r.round))
        .max()
        .unwrap_or(1) as f64;
    let (mut y_min, mut y_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for r in series.iter().flat_map(|s| &s.rows) {
        y_min = y_min.min(r.mean - r.stderr);
        y_max = y_max.max(r.mean + r.stderr);
    }
    if !(y_max > y_min) {
        y_min = y_min.min(0.0);
        y_max = y_min + 1.0;
    }
    let px = |x: f64| MARGIN + x / x_max * (WIDTH - 2.0 * MARGIN);
    let py = |y: f64| HEIGHT - MARGIN - (y - y_min) / (y_max - y_min) * (HEIGHT - 2.0 * MARGIN);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let (x0, x1, y0, y1) = (px(0.0), px(x_max), py(y_min), py(y_max));
    let _ = writeln!(
        svg,
        r#"<path d="M{x0:.1},{y1:.1} L{x0:.1},{y0:.1} L{x1:.1},{y0:.1}" stroke="black" fill="none"/>"#
    );
    let _ = writeln!(svg, r#"<text x="{x0:.1}" y="{:.1}">0</text>"#, y0 + 16.0);
    let _ = writeln!(
        svg,
        r#"<text x="{x1:.1}" y="{:.1}" text-anchor="end">{x_max}</text>"#,
        y0 + 16.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">round</text>"#,
        (x0 + x1) / 2.0,
        y0 + 32.0
    );
    for (y, v) in [(y0, y_min), (y1, y_max)] {
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{y:.1}" text-anchor="end">{v:.3e}</text>"#,
            x0 - 4.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{x0:.1}" y="{:.1}">{y_label}</text>"#,
        y1 - 12.0
    );
    for (k, s) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let upper = s
            .rows
            .iter()
            .map(|r| (px(r.round as f64), py(r.mean + r.stderr)));
        let lower = s
            .rows
            .iter()
            .rev()
            .map(|r| (px(r.round as f64), py(r.mean - r.stderr)));
        let band: Vec<String> = upper
            .chain(lower)
            .map(|(x, y)| format!("{x:.1},{y:.1}"))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polygon points="{}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#,
            band.join(" ")
        );
        let line: Vec<String> = s
            .rows
            .iter()
            .map(|r| format!("{:.1},{:.1}", px(r.round as f64), py(r.mean)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            line.join(" ")
        );
        let ly = y1 + 16.0 * k as f64;
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{ly:.1}" fill="{color}">{}</text>"#,
            x1 - 100.0,
            s.name
        );
    }
    svg.push_str("</svg>\n");
    std::fs::write(output, svg).map_err(csv::Error::from)
}
