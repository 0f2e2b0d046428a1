//! Learning curves as standalone SVG.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{usage, Error, Result};
use crate::harness::run::{read_metrics, MetricsRow};
use crate::harness::stats::{bootstrap_ci, mean};
use crate::rng::RngStream;

/// One labelled curve: mean across seeds and an optional confidence band.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub label: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub band: Vec<Option<(f64, f64)>>,
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

fn metric_value(row: &MetricsRow, metric: &str) -> Result<f64> {
    Ok(match metric {
        "avg_return" => row.avg_return,
        "avg_disc_return" => row.avg_disc_return,
        "entropy" => row.entropy,
        "frac_partial" => row.frac_partial,
        other => return usage(format!("cannot plot metric '{other}'")),
    })
}

/// Builds curves from metrics files, one curve per parent directory, with
/// 95% bootstrap bands across seeds.
pub fn curves_from_files(paths: &[PathBuf], metric: &str) -> Result<Vec<Curve>> {
    let mut groups: BTreeMap<String, Vec<Vec<MetricsRow>>> = BTreeMap::new();
    for p in paths {
        let label = p
            .parent()
            .and_then(|d| d.file_name())
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| p.display().to_string());
        groups.entry(label).or_default().push(read_metrics(p)?);
    }
    let mut rng = RngStream::new(0, "plot-bootstrap");
    let mut curves = Vec::new();
    for (label, runs) in groups {
        let len = runs.iter().map(Vec::len).min().unwrap_or(0);
        let mut c = Curve {
            label,
            x: Vec::with_capacity(len),
            y: Vec::with_capacity(len),
            band: Vec::with_capacity(len),
        };
        for i in 0..len {
            let vals: Vec<f64> = runs
                .iter()
                .map(|r| metric_value(&r[i], metric))
                .collect::<Result<Vec<f64>>>()?
                .into_iter()
                .filter(|v| v.is_finite())
                .collect();
            if vals.is_empty() {
                continue;
            }
            c.x.push(runs[0][i].timesteps as f64);
            c.y.push(mean(&vals));
            c.band.push(bootstrap_ci(&vals, 0.95, 2000, &mut rng).ok());
        }
        curves.push(c);
    }
    Ok(curves)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn render_svg(curves: &[Curve], title: &str, y_label: &str) -> String {
    let (w, h) = (720.0, 440.0);
    let (left, right, top, bottom) = (70.0, 160.0, 40.0, 50.0);
    let pw = w - left - right;
    let ph = h - top - bottom;
    let xs = curves.iter().flat_map(|c| c.x.iter().copied());
    let (x0, x1) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let ys = curves.iter().flat_map(|c| {
        c.y.iter()
            .copied()
            .chain(c.band.iter().flatten().flat_map(|&(lo, hi)| [lo, hi]))
    });
    let (y0, y1) = ys.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let (x0, x1) = if x0.is_finite() { (x0, x1.max(x0 + 1.0)) } else { (0.0, 1.0) };
    let (y0, y1) = if y0.is_finite() {
        let pad = ((y1 - y0) * 0.05).max(1e-9);
        (y0 - pad, y1 + pad)
    } else {
        (0.0, 1.0)
    };
    let sx = |x: f64| left + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| top + (1.0 - (y - y0) / (y1 - y0)) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#, left + pw / 2.0, escape(title));
    let _ = writeln!(
        s,
        r#"<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for k in 0..=4 {
        let f = k as f64 / 4.0;
        let (xv, yv) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            sx(xv),
            top + ph + 18.0,
            format_tick(xv)
        );
        let _ = writeln!(
            s,
            r##"<line x1="{left}" x2="{:.1}" y1="{:.1}" y2="{:.1}" stroke="#ddd"/><text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"##,
            left + pw,
            sy(yv),
            sy(yv),
            left - 6.0,
            sy(yv) + 4.0,
            format_tick(yv)
        );
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">timesteps</text>"#, left + pw / 2.0, h - 10.0);
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        top + ph / 2.0,
        top + ph / 2.0,
        escape(y_label)
    );
    for (ci, c) in curves.iter().enumerate() {
        let color = PALETTE[ci % PALETTE.len()];
        let banded: Vec<(f64, f64, f64)> = c
            .x
            .iter()
            .zip(&c.band)
            .filter_map(|(&x, b)| b.map(|(lo, hi)| (x, lo, hi)))
            .collect();
        if banded.len() >= 2 {
            let mut pts: Vec<String> = banded.iter().map(|(x, _, hi)| format!("{:.2},{:.2}", sx(*x), sy(*hi))).collect();
            pts.extend(banded.iter().rev().map(|(x, lo, _)| format!("{:.2},{:.2}", sx(*x), sy(*lo))));
            let _ = writeln!(s, r#"<polygon points="{}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#, pts.join(" "));
        }
        let line: Vec<String> = c.x.iter().zip(&c.y).map(|(&x, &y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#, line.join(" "));
        let ly = top + 14.0 + 20.0 * ci as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{}" x2="{}" y1="{ly}" y2="{ly}" stroke="{color}" stroke-width="3"/><text x="{}" y="{}">{}</text>"#,
            left + pw + 12.0,
            left + pw + 32.0,
            left + pw + 38.0,
            ly + 4.0,
            escape(&c.label)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn format_tick(v: f64) -> String {
    if v.abs() >= 1e4 {
        format!("{:.0}k", v / 1e3)
    } else if v.abs() >= 10.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

/// Reads metrics files and writes an SVG learning curve to `out`.
pub fn plot_metrics(paths: &[PathBuf], metric: &str, out: &Path) -> Result<()> {
    if paths.is_empty() {
        return usage("no metrics files given");
    }
    let curves = curves_from_files(paths, metric)?;
    let svg = render_svg(&curves, "learning curve", metric);
    std::fs::write(out, svg).map_err(|e| Error::io(out, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svg_contains_curves_and_bands() {
        let c = Curve {
            label: "guided <0.5>".into(),
            x: vec![0.0, 1.0, 2.0],
            y: vec![0.0, 1.0, 0.5],
            band: vec![Some((-0.1, 0.1)), Some((0.8, 1.2)), None],
        };
        let svg = render_svg(&[c], "t", "avg_return");
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains("<polyline"));
        assert!(svg.contains("<polygon"));
        assert!(svg.contains("guided &lt;0.5&gt;"));
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(plot_metrics(&[], "avg_return", Path::new("x.svg")).is_err());
    }
}
