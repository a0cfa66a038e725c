//! Parallel-coordinates view of per-series metadata, as CSV plus a
//! standalone HTML page with inline SVG.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::SynthError;
use crate::provenance::{write_csv, Provenance};

/// Line colour per label; anything else is drawn grey.
pub const CLASS_PALETTE: [(&str, &str); 4] = [
    ("T2W", "#1f77b4"),
    ("DWI", "#ff7f0e"),
    ("ADC", "#2ca02c"),
    ("DCE", "#d62728"),
];
const OTHER_COLOUR: &str = "#7f7f7f";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotRow {
    pub series_uid: String,
    pub label: String,
    pub repetition_time: Option<f64>,
    pub echo_time: Option<f64>,
    pub flip_angle: Option<f64>,
    pub contrast_present: bool,
    pub is4d: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistributionPlot {
    pub csv: String,
    pub html: String,
}

const AXES: [&str; 5] = ["RepetitionTime", "EchoTime", "FlipAngle", "Contrast", "4D"];
const WIDTH: f64 = 900.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 50.0;

fn axis_values(r: &PlotRow) -> [Option<f64>; 5] {
    [
        r.repetition_time,
        r.echo_time,
        r.flip_angle,
        Some(f64::from(u8::from(r.contrast_present))),
        Some(f64::from(u8::from(r.is4d))),
    ]
}

fn colour(label: &str) -> &'static str {
    CLASS_PALETTE
        .iter()
        .find(|(l, _)| *l == label)
        .map_or(OTHER_COLOUR, |(_, c)| c)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Missing values sit on a strip below each axis.
pub fn export_distribution_plot(
    rows: &[PlotRow],
    provenance: Option<&Provenance>,
) -> Result<DistributionPlot, SynthError> {
    if rows.is_empty() {
        return Err(SynthError::EmptyTable);
    }
    let mut csv_bytes = Vec::new();
    write_csv(&mut csv_bytes, provenance, rows).map_err(|e| SynthError::BadProfile(e.to_string()))?;
    let csv = String::from_utf8(csv_bytes).expect("csv output is utf-8");

    let values: Vec<[Option<f64>; 5]> = rows.iter().map(axis_values).collect();
    let mut ranges = [(f64::INFINITY, f64::NEG_INFINITY); 5];
    for v in &values {
        for (range, x) in ranges.iter_mut().zip(v) {
            if let Some(x) = x.filter(|x| x.is_finite()) {
                range.0 = range.0.min(x);
                range.1 = range.1.max(x);
            }
        }
    }
    let step = (WIDTH - 2.0 * MARGIN) / (AXES.len() - 1) as f64;
    let plot_h = HEIGHT - 2.0 * MARGIN - 20.0;
    let y_of = |axis: usize, x: Option<f64>| -> f64 {
        let (lo, hi) = ranges[axis];
        match x.filter(|x| x.is_finite()) {
            Some(x) if hi > lo => MARGIN + plot_h * (1.0 - (x - lo) / (hi - lo)),
            Some(_) => MARGIN + plot_h / 2.0,
            None => MARGIN + plot_h + 15.0,
        }
    };

    let mut svg = String::new();
    let _ = write!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    for (r, v) in rows.iter().zip(&values) {
        let points: Vec<String> = (0..AXES.len())
            .map(|a| format!("{:.1},{:.1}", MARGIN + step * a as f64, y_of(a, v[a])))
            .collect();
        let _ = write!(
            svg,
            r#"<polyline fill="none" stroke="{}" stroke-opacity="0.5" points="{}"><title>{}</title></polyline>"#,
            colour(&r.label),
            points.join(" "),
            escape(&r.series_uid)
        );
    }
    for (a, name) in AXES.iter().enumerate() {
        let x = MARGIN + step * a as f64;
        let (lo, hi) = ranges[a];
        let _ = write!(
            svg,
            r##"<line x1="{x:.1}" y1="{MARGIN}" x2="{x:.1}" y2="{:.1}" stroke="#000"/><text x="{x:.1}" y="{:.1}" text-anchor="middle" font-size="12">{name}</text>"##,
            MARGIN + plot_h,
            MARGIN - 20.0
        );
        if lo <= hi {
            let _ = write!(
                svg,
                r#"<text x="{:.1}" y="{MARGIN}" font-size="10">{hi}</text><text x="{:.1}" y="{:.1}" font-size="10">{lo}</text>"#,
                x + 4.0,
                x + 4.0,
                MARGIN + plot_h
            );
        }
    }
    for (i, (label, c)) in CLASS_PALETTE.iter().chain([("other", OTHER_COLOUR)].iter()).enumerate() {
        let x = MARGIN + 90.0 * i as f64;
        let y = HEIGHT - 12.0;
        let _ = write!(
            svg,
            r#"<rect x="{x:.1}" y="{:.1}" width="12" height="12" fill="{c}"/><text x="{:.1}" y="{y:.1}" font-size="12">{label}</text>"#,
            y - 10.0,
            x + 16.0
        );
    }
    svg.push_str("</svg>");

    let note = provenance
        .map(|p| format!("<!--{}-->\n", escape(p.comment_line().trim_start_matches('#'))))
        .unwrap_or_default();
    let html = format!(
        "<!DOCTYPE html>\n{note}<html><head><meta charset=\"utf-8\"><title>Series metadata distribution</title></head>\n<body>\n<h1>Series metadata distribution</h1>\n<p>{} series</p>\n{svg}\n</body></html>\n",
        rows.len()
    );
    Ok(DistributionPlot { csv, html })
}
