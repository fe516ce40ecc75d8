//! Self-contained SVG line charts.
//!
//! Coordinates are printed with a fixed number of decimals, so identical tables
//! always produce identical bytes.

use std::fmt::Write as _;

use super::table::SweepTable;
use super::CliError;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 450.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 160.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 60.0;
const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Axes {
    pub log_x: bool,
    pub log_y: bool,
}

struct Scale {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Scale {
    fn fit(values: impl Iterator<Item = f64>, log: bool) -> Option<Self> {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values.filter_map(|v| transform(v, log)) {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !lo.is_finite() {
            return None;
        }
        if hi - lo <= f64::EPSILON * lo.abs().max(1.0) {
            lo -= 0.5;
            hi += 0.5;
        }
        Some(Self { lo, hi, log })
    }

    fn unit(&self, v: f64) -> Option<f64> {
        transform(v, self.log).map(|t| (t - self.lo) / (self.hi - self.lo))
    }

    /// Tick positions in data space.
    fn ticks(&self) -> Vec<f64> {
        if self.log {
            let first = self.lo.ceil() as i32;
            let last = self.hi.floor() as i32;
            let stride = ((last - first) / 8 + 1).max(1);
            return (first..=last)
                .step_by(stride as usize)
                .map(|e| 10f64.powi(e))
                .collect();
        }
        let raw = (self.hi - self.lo) / 5.0;
        let mag = 10f64.powf(raw.log10().floor());
        let step = [1.0, 2.0, 5.0, 10.0]
            .iter()
            .map(|m| m * mag)
            .find(|s| *s >= raw)
            .unwrap_or(10.0 * mag);
        let mut t = (self.lo / step).ceil() * step;
        let mut out = Vec::new();
        while t <= self.hi + 1e-9 * step {
            out.push(if t.abs() < 1e-12 * step { 0.0 } else { t });
            t += step;
        }
        out
    }
}

fn transform(v: f64, log: bool) -> Option<f64> {
    match (log, v.is_finite()) {
        (_, false) => None,
        (true, _) if v <= 0.0 => None,
        (true, _) => Some(v.log10()),
        (false, _) => Some(v),
    }
}

fn tick_label(v: f64, log: bool) -> String {
    if log {
        return format!("1e{}", v.log10().round() as i32);
    }
    let a = v.abs();
    if a != 0.0 && !(1e-3..1e4).contains(&a) {
        format!("{v:.2e}")
    } else {
        let s = format!("{v:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Renders `y` columns against `x` as polylines. Points that cannot be shown
/// on a log axis break the line rather than being clamped.
pub fn render_svg(
    table: &SweepTable,
    x: &str,
    ys: &[&str],
    axes: Axes,
) -> Result<String, CliError> {
    if table.rows.is_empty() {
        return Err(CliError::Usage("cannot plot an empty table".into()));
    }
    if ys.is_empty() {
        return Err(CliError::Usage("no y columns to plot".into()));
    }
    let xs = table.column(x)?;
    let series: Vec<(&str, Vec<f64>)> = ys
        .iter()
        .map(|name| table.column(name).map(|v| (*name, v)))
        .collect::<Result<_, _>>()?;

    let sx = Scale::fit(xs.iter().copied(), axes.log_x)
        .ok_or_else(|| CliError::Usage(format!("column `{x}` has nothing plottable")))?;
    let sy = Scale::fit(
        series.iter().flat_map(|(_, v)| v.iter().copied()),
        axes.log_y,
    )
    .ok_or_else(|| CliError::Usage("y columns have nothing plottable".into()))?;

    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let px = |u: f64| LEFT + u * pw;
    let py = |u: f64| TOP + (1.0 - u) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        s,
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let _ = writeln!(
        s,
        r##"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="#333"/>"##
    );

    for t in sx.ticks() {
        let Some(u) = sx.unit(t) else { continue };
        let xpos = px(u);
        let _ = writeln!(
            s,
            r##"<line x1="{xpos:.2}" y1="{:.2}" x2="{xpos:.2}" y2="{:.2}" stroke="#ddd"/>"##,
            TOP,
            TOP + ph
        );
        let _ = writeln!(
            s,
            r#"<text x="{xpos:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            TOP + ph + 18.0,
            tick_label(t, sx.log)
        );
    }
    for t in sy.ticks() {
        let Some(u) = sy.unit(t) else { continue };
        let ypos = py(u);
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT}" y1="{ypos:.2}" x2="{:.2}" y2="{ypos:.2}" stroke="#ddd"/>"##,
            LEFT + pw
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            LEFT - 6.0,
            ypos + 4.0,
            tick_label(t, sy.log)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 15.0,
        escape(x)
    );

    for (k, (name, values)) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let mut runs: Vec<Vec<(f64, f64)>> = vec![Vec::new()];
        for (xv, yv) in xs.iter().zip(values) {
            match (sx.unit(*xv), sy.unit(*yv)) {
                (Some(u), Some(v)) => runs.last_mut().unwrap().push((px(u), py(v))),
                _ => {
                    if !runs.last().unwrap().is_empty() {
                        runs.push(Vec::new());
                    }
                }
            }
        }
        for run in runs.iter().filter(|r| !r.is_empty()) {
            let pts: Vec<String> = run.iter().map(|(a, b)| format!("{a:.2},{b:.2}")).collect();
            let _ = writeln!(
                s,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                pts.join(" ")
            );
        }
        let ly = TOP + 10.0 + 18.0 * k as f64;
        let lx = LEFT + pw + 12.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/>"#,
            lx + 20.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}">{}</text>"#,
            lx + 26.0,
            ly + 4.0,
            escape(name)
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

/// Renders and writes the chart.
pub fn emit_svg(
    table: &SweepTable,
    x: &str,
    ys: &[&str],
    axes: Axes,
    path: &std::path::Path,
) -> Result<(), CliError> {
    let svg = render_svg(table, x, ys, axes)?;
    super::write_file(path, &svg)
}
