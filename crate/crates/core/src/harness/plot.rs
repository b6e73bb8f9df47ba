//! Standalone SVG log-log convergence plots.
//!
//! Data polylines carry their points as `(log10 m, log10 e)` inside one affine transform, so
//! slopes can be read back from the coordinates.

use std::fmt::Write as _;
use std::path::Path;

use super::{format_sci, Axis, Norm, StudyReport, StudyRow};
use crate::error::{Error, Result};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 60.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

fn mesh_parameter(row: &StudyRow, axis: Axis) -> f64 {
    row.rate_parameter.unwrap_or(match axis {
        Axis::Space => row.subdivisions as f64,
        Axis::Time => row.steps as f64,
    })
}

struct Series {
    alpha: f64,
    delta: f64,
    points: Vec<(f64, f64)>,
}

fn collect_series(report: &StudyReport, norm: Norm) -> Result<Vec<Series>> {
    let mut out: Vec<Series> = Vec::new();
    for row in &report.rows {
        let Some(e) = row.error(norm) else { continue };
        let point = (mesh_parameter(row, report.metadata.axis).log10(), e.log10());
        match out.iter_mut().find(|s| s.alpha == row.alpha && s.delta == row.delta) {
            Some(s) => s.points.push(point),
            None => out.push(Series {
                alpha: row.alpha,
                delta: row.delta,
                points: vec![point],
            }),
        }
    }
    if out.is_empty() {
        return Err(Error::Domain("no errors to plot".into()));
    }
    if let Some(s) = out.iter().find(|s| s.points.len() < 2) {
        return Err(Error::Domain(format!(
            "series alpha = {}, delta = {} has too few points to plot",
            s.alpha, s.delta
        )));
    }
    Ok(out)
}

fn fmt_num(v: f64) -> String {
    let s = format!("{v:.12}");
    if s == "-0.000000000000" {
        "0.000000000000".into()
    } else {
        s
    }
}

/// Render the log-log plot of one norm as an SVG document.
pub fn render_loglog_svg(report: &StudyReport, norm: Norm) -> Result<String> {
    if norm == Norm::Both {
        return Err(Error::Config("plot one norm at a time (l2 or h1)".into()));
    }
    let series = collect_series(report, norm)?;
    let all = series.iter().flat_map(|s| s.points.iter().copied());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for (x, y) in all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    let slope = report.metadata.reference_slope.unwrap_or(1.0);
    // Guide line sits one factor of two below the first point of the first series.
    let (gx, gy) = series[0].points[0];
    let guide = [
        (x0, gy - 2f64.log10() - slope * (x0 - gx)),
        (x1, gy - 2f64.log10() - slope * (x1 - gx)),
    ];
    for &(_, y) in &guide {
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    let pad_x = 0.05 * (x1 - x0).max(1e-3);
    let pad_y = 0.05 * (y1 - y0).max(1e-3);
    let (x0, x1, y0, y1) = (x0 - pad_x, x1 + pad_x, y0 - pad_y, y1 + pad_y);
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let sx = plot_w / (x1 - x0);
    let sy = plot_h / (y1 - y0);
    let tx = LEFT - sx * x0;
    let ty = TOP + plot_h + sy * y0;
    let to_px = |x: f64, y: f64| (tx + sx * x, ty - sy * y);

    let label = match norm {
        Norm::H1 => "H1 error",
        _ => "L2 error",
    };
    let xlabel = match report.metadata.axis {
        Axis::Space => "P",
        Axis::Time => "N",
    };

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r##"<rect x="{LEFT}" y="{TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="#444"/>"##
    );
    for i in 0..=4 {
        let x = x0 + (x1 - x0) * i as f64 / 4.0;
        let (px, _) = to_px(x, y0);
        let _ = writeln!(
            svg,
            r##"<line x1="{0}" y1="{1}" x2="{0}" y2="{2}" stroke="#444"/><text x="{0}" y="{3}" font-size="11" text-anchor="middle">{4:.4}</text>"##,
            fmt_num(px),
            fmt_num(TOP + plot_h),
            fmt_num(TOP + plot_h + 5.0),
            fmt_num(TOP + plot_h + 18.0),
            10f64.powf(x),
        );
        let y = y0 + (y1 - y0) * i as f64 / 4.0;
        let (_, py) = to_px(x0, y);
        let _ = writeln!(
            svg,
            r##"<line x1="{0}" y1="{1}" x2="{2}" y2="{1}" stroke="#444"/><text x="{3}" y="{4}" font-size="11" text-anchor="end">{5:.3e}</text>"##,
            fmt_num(LEFT - 5.0),
            fmt_num(py),
            fmt_num(LEFT),
            fmt_num(LEFT - 8.0),
            fmt_num(py + 4.0),
            10f64.powf(y),
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" font-size="13" text-anchor="middle">{xlabel} (log scale)</text>"#,
        fmt_num(LEFT + plot_w / 2.0),
        fmt_num(HEIGHT - 15.0)
    );
    let _ = writeln!(
        svg,
        r#"<text x="18" y="{0}" font-size="13" text-anchor="middle" transform="rotate(-90 18 {0})">{label} (log scale)</text>"#,
        fmt_num(TOP + plot_h / 2.0)
    );

    let _ = writeln!(
        svg,
        r#"<g id="data" transform="matrix({} 0 0 {} {} {})">"#,
        fmt_num(sx),
        fmt_num(-sy),
        fmt_num(tx),
        fmt_num(ty)
    );
    for (k, s) in series.iter().enumerate() {
        let pts: Vec<String> = s
            .points
            .iter()
            .map(|&(x, y)| format!("{},{}", fmt_num(x), fmt_num(y)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline class="series" data-alpha="{}" data-delta="{}" points="{}" fill="none" stroke="{}" stroke-width="2" vector-effect="non-scaling-stroke"/>"#,
            s.alpha,
            s.delta,
            pts.join(" "),
            PALETTE[k % PALETTE.len()]
        );
    }
    let _ = writeln!(
        svg,
        r##"<polyline class="guide" data-slope="{}" points="{},{} {},{}" fill="none" stroke="#888" stroke-dasharray="6 4" vector-effect="non-scaling-stroke"/>"##,
        format_sci(slope),
        fmt_num(guide[0].0),
        fmt_num(guide[0].1),
        fmt_num(guide[1].0),
        fmt_num(guide[1].1)
    );
    let _ = writeln!(svg, "</g>");

    let lx = WIDTH - RIGHT + 15.0;
    for (k, s) in series.iter().enumerate() {
        let ly = TOP + 15.0 + 18.0 * k as f64;
        let _ = writeln!(
            svg,
            r#"<line x1="{0}" y1="{1}" x2="{2}" y2="{1}" stroke="{3}" stroke-width="2"/><text x="{4}" y="{5}" font-size="11">alpha={6} delta={7:.4}</text>"#,
            fmt_num(lx),
            fmt_num(ly),
            fmt_num(lx + 20.0),
            PALETTE[k % PALETTE.len()],
            fmt_num(lx + 25.0),
            fmt_num(ly + 4.0),
            s.alpha,
            s.delta
        );
    }
    let ly = TOP + 15.0 + 18.0 * series.len() as f64;
    let _ = writeln!(
        svg,
        r##"<line x1="{0}" y1="{1}" x2="{2}" y2="{1}" stroke="#888" stroke-dasharray="6 4"/><text x="{3}" y="{4}" font-size="11">slope {5}</text>"##,
        fmt_num(lx),
        fmt_num(ly),
        fmt_num(lx + 20.0),
        fmt_num(lx + 25.0),
        fmt_num(ly + 4.0),
        slope
    );
    svg.push_str("</svg>\n");
    Ok(svg)
}

pub fn emit_loglog_plot(report: &StudyReport, norm: Norm, path: impl AsRef<Path>) -> Result<()> {
    let svg = render_loglog_svg(report, norm)?;
    std::fs::write(path.as_ref(), svg).map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))
}
