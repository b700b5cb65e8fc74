//! File formats: scan CSV and sidecar, measure JSON, plan CSV, SVG plots.
//!
//! Floats are written with 17 significant digits so values round-trip.

use std::fmt::Write as _;
use std::io;

use serde::ser::Serialize;
use serde::Deserialize;
use serde_json::ser::Formatter;

use crate::error::{Error, Result};
use crate::toricity::ScanResult;
use crate::transport::{DiscreteMeasure, TransportPlan};

/// `x` with 17 significant digits, e.g. `3.3510321638291124e1`.
pub fn format_f64(x: f64) -> String {
    if x == 0.0 {
        // keep the sign-free form for -0.0 as well
        return "0.0000000000000000e0".to_string();
    }
    format!("{x:.16e}")
}

/// serde_json formatter that writes floats via [`format_f64`].
struct SignificantDigits;

impl Formatter for SignificantDigits {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        writer.write_all(format_f64(value).as_bytes())
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

/// Compact JSON with 17-significant-digit floats. Non-finite floats are
/// rejected since JSON cannot represent them.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, SignificantDigits);
    value
        .serialize(&mut ser)
        .map_err(|e| Error::Format(e.to_string()))?;
    let text = String::from_utf8(out).map_err(|e| Error::Format(e.to_string()))?;
    if text.contains("inf") || text.contains("NaN") {
        return Err(Error::Format("non-finite number in JSON output".into()));
    }
    Ok(text)
}

pub fn scan_csv_header(n: usize) -> String {
    let mut cols: Vec<String> = (1..=n).map(|k| format!("t_{k}")).collect();
    cols.push("value".into());
    cols.push("std_error".into());
    cols.join(",")
}

/// One row per grid point in lexicographic grid order.
pub fn write_scan_csv(scan: &ScanResult) -> String {
    let n = scan.grid.dimension();
    let mut out = scan_csv_header(n);
    out.push('\n');
    for e in &scan.estimates {
        let row: Vec<String> =
            e.t.entries()
                .iter()
                .chain([&e.value, &e.std_error])
                .map(|x| format_f64(*x))
                .collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanRow {
    pub t: Vec<f64>,
    pub value: f64,
    pub std_error: f64,
}

/// Parse a scan CSV back into rows; the number of `t_k` columns is read from
/// the header.
pub fn read_scan_csv(text: &str) -> Result<(usize, Vec<ScanRow>)> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::Format("scan CSV is empty".into()))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    let n = cols.len().saturating_sub(2);
    if n == 0 || header.trim() != scan_csv_header(n) {
        return Err(Error::Format(format!(
            "unexpected scan CSV header `{header}`"
        )));
    }
    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let fields = line
            .split(',')
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Format(format!("row {}: {e}", lineno + 1)))?;
        if fields.len() != n + 2 {
            return Err(Error::Format(format!(
                "row {} has {} fields, expected {}",
                lineno + 1,
                fields.len(),
                n + 2
            )));
        }
        rows.push(ScanRow {
            t: fields[..n].to_vec(),
            value: fields[n],
            std_error: fields[n + 1],
        });
    }
    if rows.is_empty() {
        return Err(Error::Format("scan CSV has no data rows".into()));
    }
    Ok((n, rows))
}

pub fn read_measure_json(text: &str) -> Result<DiscreteMeasure> {
    #[derive(Deserialize)]
    struct Raw {
        points: Vec<Vec<f64>>,
        weights: Vec<f64>,
    }
    let raw: Raw = serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
    DiscreteMeasure::new(raw.points, raw.weights)
}

pub fn write_measure_json(m: &DiscreteMeasure) -> Result<String> {
    to_json(m)
}

/// Plan matrix as CSV, one row per source point, no header.
pub fn write_plan_csv(plan: &TransportPlan) -> String {
    let mut out = String::new();
    for i in 0..plan.rows {
        let row: Vec<String> = (0..plan.cols).map(|j| format_f64(plan.get(i, j))).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 48.0;

fn svg_num(x: f64) -> String {
    format!("{x:.3}")
}

/// Render scan rows as SVG: a polyline for n = 1, a heatmap for n = 2.
pub fn render_scan_svg(n: usize, rows: &[ScanRow]) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::Format("nothing to plot".into()));
    }
    match n {
        1 => Ok(line_plot(rows)),
        2 => heatmap(rows),
        _ => Err(Error::InvalidInput(format!(
            "cannot plot a scan with n = {n}"
        ))),
    }
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    });
    if hi > lo {
        (lo, hi)
    } else {
        (lo - 0.5, lo + 0.5)
    }
}

fn svg_open(out: &mut String) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#,
        w = WIDTH,
        h = HEIGHT
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
}

fn line_plot(rows: &[ScanRow]) -> String {
    let (t_lo, t_hi) = range(rows.iter().map(|r| r.t[0]));
    let (v_lo, v_hi) = range(rows.iter().map(|r| r.value));
    let sx = |t: f64| MARGIN + (t - t_lo) / (t_hi - t_lo) * (WIDTH - 2.0 * MARGIN);
    let sy = |v: f64| HEIGHT - MARGIN - (v - v_lo) / (v_hi - v_lo) * (HEIGHT - 2.0 * MARGIN);
    let mut out = String::new();
    svg_open(&mut out);
    let _ = writeln!(
        out,
        r#"<rect x="{m}" y="{m}" width="{w}" height="{h}" fill="none" stroke="black"/>"#,
        m = MARGIN,
        w = WIDTH - 2.0 * MARGIN,
        h = HEIGHT - 2.0 * MARGIN
    );
    let points: Vec<String> = rows
        .iter()
        .map(|r| format!("{},{}", svg_num(sx(r.t[0])), svg_num(sy(r.value))))
        .collect();
    let _ = writeln!(
        out,
        r#"<polyline fill="none" stroke="steelblue" stroke-width="1.5" points="{}"/>"#,
        points.join(" ")
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">t ({} to {})</text>"#,
        WIDTH / 2.0,
        HEIGHT - 12.0,
        svg_num(t_lo),
        svg_num(t_hi)
    );
    let _ = writeln!(
        out,
        r#"<text x="12" y="{}" font-size="12">C_t ({} to {})</text>"#,
        MARGIN - 12.0,
        svg_num(v_lo),
        svg_num(v_hi)
    );
    out.push_str("</svg>\n");
    out
}

fn heatmap(rows: &[ScanRow]) -> Result<String> {
    let mut xs: Vec<f64> = rows.iter().map(|r| r.t[0]).collect();
    let mut ys: Vec<f64> = rows.iter().map(|r| r.t[1]).collect();
    for v in [&mut xs, &mut ys] {
        v.sort_by(f64::total_cmp);
        v.dedup();
    }
    if xs.len() * ys.len() != rows.len() {
        return Err(Error::Format(format!(
            "{} rows do not form a {}x{} grid",
            rows.len(),
            xs.len(),
            ys.len()
        )));
    }
    let (v_lo, v_hi) = range(rows.iter().map(|r| r.value));
    let cw = (WIDTH - 2.0 * MARGIN) / xs.len() as f64;
    let ch = (HEIGHT - 2.0 * MARGIN) / ys.len() as f64;
    let mut out = String::new();
    svg_open(&mut out);
    for r in rows {
        let i = xs.partition_point(|x| *x < r.t[0]);
        let j = ys.partition_point(|y| *y < r.t[1]);
        let s = ((r.value - v_lo) / (v_hi - v_lo)).clamp(0.0, 1.0);
        // dark at zero cost, light where the cost is large
        let shade = (255.0 * s).round() as u8;
        let _ = writeln!(
            out,
            r#"<rect x="{}" y="{}" width="{}" height="{}" fill="rgb({shade},{shade},255)"/>"#,
            svg_num(MARGIN + i as f64 * cw),
            svg_num(HEIGHT - MARGIN - (j + 1) as f64 * ch),
            svg_num(cw),
            svg_num(ch)
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}
