//! Report emission: JSON documents, CSV tables, and a static SVG line chart
//! for log-log data. Output is byte-deterministic for a fixed config + seed.

use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::dimension::{BoxCountReport, DimensionReport, MlemaReport};
use crate::error::Result;

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn write_partials_csv(path: &Path, report: &DimensionReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "k",
        "numerator",
        "denominator_argument",
        "partial_value",
        "partial_with_end_gaps",
    ])?;
    for row in &report.partials {
        w.write_record([
            row.k.to_string(),
            row.numerator.clone(),
            row.denominator_argument.clone(),
            row.value.to_string(),
            row.value_with_end_gaps.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_loglog_csv(path: &Path, report: &BoxCountReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["eps", "count", "log_inv_eps", "log_count"])?;
    for ((eps, count), (x, y)) in report
        .scales
        .iter()
        .zip(&report.counts)
        .zip(report.loglog_points())
    {
        w.write_record([
            eps.to_string(),
            count.to_string(),
            x.to_string(),
            y.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_mlema_csv(path: &Path, report: &MlemaReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "k",
        "total_length_root",
        "gap_power_mean",
        "large_gap_density",
    ])?;
    for (i, ((a, b), c)) in report
        .total_length_root
        .iter()
        .zip(&report.gap_power_mean)
        .zip(&report.large_gap_density)
        .enumerate()
    {
        w.write_record([
            (i + 1).to_string(),
            a.to_string(),
            b.to_string(),
            c.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Minimal line chart of `(x, y)` points with the fitted line overlaid.
pub fn loglog_svg(report: &BoxCountReport, title: &str) -> String {
    const W: f64 = 640.0;
    const H: f64 = 440.0;
    const PAD: f64 = 60.0;
    let pts = report.loglog_points();
    let (mut x0, mut x1) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY);
    for (x, y) in &pts {
        x0 = x0.min(*x);
        x1 = x1.max(*x);
        y0 = y0.min(*y);
        y1 = y1.max(*y);
    }
    if !(x1 > x0) {
        x1 = x0 + 1.0;
    }
    if !(y1 > y0) {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| PAD + (x - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - (y - y0) / (y1 - y0) * (H - 2.0 * PAD);
    let poly: Vec<String> = pts
        .iter()
        .map(|(x, y)| format!("{:.2},{:.2}", sx(*x), sy(*y)))
        .collect();
    let fit_y = |x: f64| report.slope * x + report.intercept;
    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" \
         viewBox=\"0 0 {W} {H}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    svg.push_str(&format!(
        "<text x=\"{:.0}\" y=\"24\" font-family=\"monospace\" font-size=\"14\">{} \
         (slope {:.4}, residual {:.4})</text>\n",
        PAD, title, report.slope, report.residual
    ));
    svg.push_str(&format!(
        "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"black\"/>\n",
        PAD,
        H - PAD,
        W - PAD,
        H - PAD
    ));
    svg.push_str(&format!(
        "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"black\"/>\n",
        PAD,
        PAD,
        PAD,
        H - PAD
    ));
    svg.push_str(&format!(
        "<text x=\"{:.0}\" y=\"{:.0}\" font-family=\"monospace\" font-size=\"12\">log 1/eps</text>\n",
        W / 2.0 - 30.0,
        H - PAD / 3.0
    ));
    svg.push_str(&format!(
        "<text x=\"14\" y=\"{:.0}\" font-family=\"monospace\" font-size=\"12\" \
         transform=\"rotate(-90 14 {:.0})\">log count</text>\n",
        H / 2.0,
        H / 2.0
    ));
    svg.push_str(&format!(
        "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"#888\" \
         stroke-dasharray=\"6 3\"/>\n",
        sx(x0),
        sy(fit_y(x0)),
        sx(x1),
        sy(fit_y(x1))
    ));
    svg.push_str(&format!(
        "<polyline points=\"{}\" fill=\"none\" stroke=\"#1f4e8c\" stroke-width=\"1.5\"/>\n",
        poly.join(" ")
    ));
    for (x, y) in &pts {
        svg.push_str(&format!(
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"#1f4e8c\"/>\n",
            sx(*x),
            sy(*y)
        ));
    }
    svg.push_str("</svg>\n");
    svg
}
