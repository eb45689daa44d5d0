//! Minimal standalone SVG plots with reference guides.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{CliError, CliResult};
use crate::table::NumericCsv;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    /// `scaled_norm` against `t` on log-log axes.
    DecayLogLog,
    /// `nu` against `s`.
    NuVsS,
    /// `mass` summed per `x1`.
    Histogram,
}

impl std::str::FromStr for PlotKind {
    type Err = CliError;
    fn from_str(s: &str) -> CliResult<Self> {
        match s {
            "decay-loglog" => Ok(PlotKind::DecayLogLog),
            "nu-vs-s" => Ok(PlotKind::NuVsS),
            "histogram" => Ok(PlotKind::Histogram),
            _ => Err(CliError::ConfigInvalid(format!("unknown plot kind {s}"))),
        }
    }
}

impl PlotKind {
    pub fn name(self) -> &'static str {
        match self {
            PlotKind::DecayLogLog => "decay-loglog",
            PlotKind::NuVsS => "nu-vs-s",
            PlotKind::Histogram => "histogram",
        }
    }

    fn columns(self) -> (&'static str, &'static str) {
        match self {
            PlotKind::DecayLogLog => ("t", "scaled_norm"),
            PlotKind::NuVsS => ("s", "nu"),
            PlotKind::Histogram => ("x1", "mass"),
        }
    }
}

/// Power-law guides drawn on decay plots.
pub const GUIDE_SLOPES: [f64; 4] = [-0.25, -0.75, -0.5, -1.5];
/// Limits of the lowest self-similar eigenvalue.
pub const NU_GUIDES: [f64; 2] = [0.25, 0.75];

const W: f64 = 640.0;
const H: f64 = 420.0;
const M: f64 = 60.0;

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn fit(xs: &[f64], ys: &[f64]) -> Self {
        let span = |v: &[f64]| {
            let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let pad = if hi > lo { 0.05 * (hi - lo) } else { 0.5 };
            (lo - pad, hi + pad)
        };
        Self { x: span(xs), y: span(ys) }
    }

    fn px(&self, x: f64) -> f64 {
        M + (x - self.x.0) / (self.x.1 - self.x.0) * (W - 2.0 * M)
    }

    fn py(&self, y: f64) -> f64 {
        H - M - (y - self.y.0) / (self.y.1 - self.y.0) * (H - 2.0 * M)
    }
}

fn header(out: &mut String, title: &str, frame: &Frame, xlabel: &str, ylabel: &str) {
    let _ = write!(
        out,
        r##"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">
<rect width="100%" height="100%" fill="white"/>
<text x="{}" y="24" text-anchor="middle" font-size="15">{title}</text>
<rect x="{M}" y="{M}" width="{}" height="{}" fill="none" stroke="black"/>
<text x="{}" y="{}" text-anchor="middle">{xlabel}</text>
<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{ylabel}</text>
"##,
        W / 2.0,
        W - 2.0 * M,
        H - 2.0 * M,
        W / 2.0,
        H - 18.0,
        H / 2.0,
        H / 2.0
    );
    for k in 0..=4 {
        let fx = frame.x.0 + (frame.x.1 - frame.x.0) * k as f64 / 4.0;
        let fy = frame.y.0 + (frame.y.1 - frame.y.0) * k as f64 / 4.0;
        let (px, py) = (frame.px(fx), frame.py(fy));
        let _ = writeln!(
            out,
            r#"<line x1="{px:.1}" y1="{:.1}" x2="{px:.1}" y2="{:.1}" stroke="black"/><text x="{px:.1}" y="{:.1}" text-anchor="middle">{fx:.3}</text>"#,
            H - M,
            H - M + 5.0,
            H - M + 18.0
        );
        let _ = writeln!(
            out,
            r#"<line x1="{:.1}" y1="{py:.1}" x2="{M}" y2="{py:.1}" stroke="black"/><text x="{:.1}" y="{:.1}" text-anchor="end">{fy:.3}</text>"#,
            M - 5.0,
            M - 7.0,
            py + 4.0
        );
    }
}

fn guide(out: &mut String, frame: &Frame, p: (f64, f64), q: (f64, f64), label: &str, color: &str) {
    let _ = writeln!(
        out,
        r#"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="{color}" stroke-dasharray="6 4"/><text x="{:.1}" y="{:.1}" fill="{color}">{label}</text>"#,
        frame.px(p.0),
        frame.py(p.1),
        frame.px(q.0),
        frame.py(q.1),
        frame.px(q.0) + 4.0,
        frame.py(q.1)
    );
}

fn points(out: &mut String, frame: &Frame, xs: &[f64], ys: &[f64]) {
    for (&x, &y) in xs.iter().zip(ys) {
        let _ = writeln!(
            out,
            r#"<circle cx="{:.1}" cy="{:.1}" r="3" fill="steelblue"/>"#,
            frame.px(x),
            frame.py(y)
        );
    }
}

const COLORS: [&str; 4] = ["#c0392b", "#27ae60", "#8e44ad", "#d35400"];

/// Renders `data` as an SVG document.
pub fn render(data: &NumericCsv, kind: PlotKind, title: &str) -> CliResult<String> {
    let mismatch = |reason: String| CliError::SchemaMismatch {
        kind: kind.name().into(),
        reason,
    };
    let (xn, yn) = kind.columns();
    let xs = data.column(xn).ok_or_else(|| mismatch(format!("missing column {xn}")))?;
    let ys = data.column(yn).ok_or_else(|| mismatch(format!("missing column {yn}")))?;
    if xs.is_empty() {
        return Err(mismatch("no data rows".into()));
    }
    let mut out = String::new();
    match kind {
        PlotKind::DecayLogLog => {
            let (lx, ly): (Vec<f64>, Vec<f64>) = xs
                .iter()
                .zip(ys)
                .filter(|(x, y)| **x > 0.0 && **y > 0.0)
                .map(|(x, y)| (x.log10(), y.log10()))
                .unzip();
            if lx.is_empty() {
                return Err(mismatch("no positive samples for log axes".into()));
            }
            let frame = Frame::fit(&lx, &ly);
            header(&mut out, title, &frame, "log10 t", "log10 scaled norm");
            let (x0, y0) = (lx[0], ly[0]);
            let x1 = frame.x.1;
            for (s, c) in GUIDE_SLOPES.iter().zip(COLORS) {
                let y1 = (y0 + s * (x1 - x0)).max(frame.y.0);
                let x_end = if s * (x1 - x0) + y0 < frame.y.0 { x0 + (frame.y.0 - y0) / s } else { x1 };
                guide(&mut out, &frame, (x0, y0), (x_end, y1), &format!("slope {s}"), c);
            }
            points(&mut out, &frame, &lx, &ly);
        }
        PlotKind::NuVsS => {
            let mut yall = ys.to_vec();
            yall.extend(NU_GUIDES);
            let frame = Frame::fit(xs, &yall);
            header(&mut out, title, &frame, "s", "nu(s)");
            for (g, c) in NU_GUIDES.iter().zip(COLORS) {
                guide(&mut out, &frame, (frame.x.0, *g), (frame.x.1 - 0.12 * (frame.x.1 - frame.x.0), *g), &format!("{g}"), c);
            }
            points(&mut out, &frame, xs, ys);
        }
        PlotKind::Histogram => {
            let mut bars: Vec<(f64, f64)> = Vec::new();
            for (&x, &y) in xs.iter().zip(ys) {
                match bars.iter_mut().find(|b| b.0 == x) {
                    Some(b) => b.1 += y,
                    None => bars.push((x, y)),
                }
            }
            bars.sort_by(|a, b| a.0.total_cmp(&b.0));
            let bx: Vec<f64> = bars.iter().map(|b| b.0).collect();
            let mut by: Vec<f64> = bars.iter().map(|b| b.1).collect();
            by.push(0.0);
            let frame = Frame::fit(&bx, &by);
            header(&mut out, title, &frame, "x1", "mass");
            let width = if bx.len() > 1 {
                (frame.px(bx[1]) - frame.px(bx[0])) * 0.9
            } else {
                20.0
            };
            for (x, y) in bars {
                let top = frame.py(y.max(0.0));
                let _ = writeln!(
                    out,
                    r#"<rect x="{:.1}" y="{top:.1}" width="{width:.1}" height="{:.1}" fill="steelblue"/>"#,
                    frame.px(x) - width / 2.0,
                    frame.py(0.0) - top
                );
            }
        }
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// Reads `csv_path` and writes the plot next to `out_path`.
pub fn emit_plot(csv_path: &Path, kind: PlotKind, out_path: &Path) -> CliResult<()> {
    let data = NumericCsv::read(csv_path)?;
    let title = csv_path.file_stem().and_then(|s| s.to_str()).unwrap_or("plot");
    let svg = render(&data, kind, title)?;
    std::fs::write(out_path, svg).map_err(|e| CliError::io(out_path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_csv_is_a_schema_mismatch() {
        let empty = NumericCsv::parse("").unwrap();
        for kind in [PlotKind::DecayLogLog, PlotKind::NuVsS, PlotKind::Histogram] {
            let e = render(&empty, kind, "x").unwrap_err();
            assert!(matches!(e, CliError::SchemaMismatch { .. }));
        }
        let header_only = NumericCsv::parse("s [1],nu [1]\n").unwrap();
        assert!(render(&header_only, PlotKind::NuVsS, "x").is_err());
    }

    #[test]
    fn decay_plot_has_all_guides() {
        let data = NumericCsv::parse("t [time],scaled_norm [1]\n5,1\n10,0.8\n20,0.7\n").unwrap();
        let svg = render(&data, PlotKind::DecayLogLog, "decay").unwrap();
        for s in ["slope -0.25", "slope -0.75", "slope -0.5", "slope -1.5"] {
            assert!(svg.contains(s), "{s}");
        }
        assert_eq!(svg.matches("<circle").count(), 3);
    }

    #[test]
    fn wrong_columns_are_rejected() {
        let data = NumericCsv::parse("t [time],scaled_norm [1]\n5,1\n").unwrap();
        assert!(matches!(
            render(&data, PlotKind::NuVsS, "x"),
            Err(CliError::SchemaMismatch { .. })
        ));
    }
}
