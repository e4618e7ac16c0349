//! Minimal SVG line and scatter plots.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::diagnostics::{lojasiewicz_fit, tracking_residual, TraceRecord};
use crate::error::RunError;
use crate::flow::FlowTrace;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const MARGIN: (f64, f64, f64, f64) = (80.0, 30.0, 40.0, 60.0); // left, right, top, bottom
const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub scatter: bool,
}

impl Series {
    pub fn line(label: &str, points: Vec<(f64, f64)>) -> Self {
        Self {
            label: label.into(),
            points,
            scatter: false,
        }
    }

    pub fn scatter(label: &str, points: Vec<(f64, f64)>) -> Self {
        Self {
            label: label.into(),
            points,
            scatter: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Figure {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub log_y: bool,
    pub series: Vec<Series>,
    /// Thin grey polylines in data coordinates, drawn under the series.
    pub overlay: Vec<Vec<(f64, f64)>>,
}

fn axis(v: f64, log: bool) -> Option<f64> {
    let u = if log { v.log10() } else { v };
    (u.is_finite()).then_some(u)
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo <= 1e-12 * lo.abs().max(1.0) {
        let pad = 0.5 * lo.abs().max(1.0);
        return (lo - pad, hi + pad);
    }
    let pad = 0.04 * (hi - lo);
    (lo - pad, hi + pad)
}

fn tick_label(u: f64, log: bool) -> String {
    if log {
        format!("1e{u:.1}")
    } else if u != 0.0 && (u.abs() >= 1e4 || u.abs() < 1e-2) {
        format!("{u:.2e}")
    } else {
        format!("{u:.3}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Renders `fig` as a standalone SVG document.
pub fn render(fig: &Figure) -> String {
    let data = fig.series.iter().flat_map(|s| s.points.iter()).filter_map(|&(x, y)| {
        Some((axis(x, fig.log_x)?, axis(y, fig.log_y)?))
    });
    let pts: Vec<(f64, f64)> = data.collect();
    let (x0, x1) = bounds(pts.iter().map(|p| p.0));
    let (y0, y1) = bounds(pts.iter().map(|p| p.1));
    let (ml, mr, mt, mb) = MARGIN;
    let (pw, ph) = (WIDTH - ml - mr, HEIGHT - mt - mb);
    let sx = |u: f64| ml + (u - x0) / (x1 - x0) * pw;
    let sy = |u: f64| mt + ph - (u - y0) / (y1 - y0) * ph;

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<clipPath id="plot"><rect x="{ml}" y="{mt}" width="{pw}" height="{ph}"/></clipPath>"#
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
        WIDTH / 2.0,
        escape(&fig.title)
    );
    for k in 0..=4 {
        let u = x0 + (x1 - x0) * k as f64 / 4.0;
        let v = y0 + (y1 - y0) * k as f64 / 4.0;
        let _ = writeln!(
            out,
            r##"<line x1="{0:.2}" y1="{1}" x2="{0:.2}" y2="{2}" stroke="#eeeeee"/><text x="{0:.2}" y="{3}" text-anchor="middle">{4}</text>"##,
            sx(u),
            mt,
            mt + ph,
            mt + ph + 16.0,
            tick_label(u, fig.log_x)
        );
        let _ = writeln!(
            out,
            r##"<line x1="{1}" y1="{0:.2}" x2="{2}" y2="{0:.2}" stroke="#eeeeee"/><text x="{3}" y="{0:.2}" text-anchor="end" dominant-baseline="middle">{4}</text>"##,
            sy(v),
            ml,
            ml + pw,
            ml - 6.0,
            tick_label(v, fig.log_y)
        );
    }
    let _ = writeln!(
        out,
        r#"<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        ml + pw / 2.0,
        HEIGHT - 18.0,
        escape(&fig.x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="18" y="{0}" text-anchor="middle" transform="rotate(-90 18 {0})">{1}</text>"#,
        mt + ph / 2.0,
        escape(&fig.y_label)
    );

    let polyline = |pts: &[(f64, f64)]| -> String {
        let mut s = String::new();
        for &(x, y) in pts {
            if let (Some(u), Some(v)) = (axis(x, fig.log_x), axis(y, fig.log_y)) {
                let _ = write!(s, "{:.2},{:.2} ", sx(u), sy(v));
            }
        }
        s
    };
    let _ = writeln!(out, r#"<g clip-path="url(#plot)">"#);
    for path in &fig.overlay {
        let _ = writeln!(
            out,
            r##"<polyline points="{}" fill="none" stroke="#999999" stroke-width="0.8"/>"##,
            polyline(path)
        );
    }
    for (i, s) in fig.series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        if s.scatter {
            for &(x, y) in &s.points {
                if let (Some(u), Some(v)) = (axis(x, fig.log_x), axis(y, fig.log_y)) {
                    let _ = writeln!(out, r#"<circle cx="{:.2}" cy="{:.2}" r="2" fill="{color}"/>"#, sx(u), sy(v));
                }
            }
        } else {
            let _ = writeln!(
                out,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
                polyline(&s.points)
            );
        }
    }
    let _ = writeln!(out, "</g>");
    for (i, s) in fig.series.iter().enumerate() {
        let y = mt + 16.0 + 16.0 * i as f64;
        let _ = writeln!(
            out,
            r#"<rect x="{}" y="{}" width="12" height="4" fill="{}"/><text x="{}" y="{}">{}</text>"#,
            ml + 10.0,
            y - 4.0,
            COLORS[i % COLORS.len()],
            ml + 28.0,
            y,
            escape(&s.label)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Boundary arcs and sides of the translates of the fundamental domain
/// covering `a ∈ [a0, a1]`, up to height `b_max`.
pub fn fundamental_domain_overlay(a0: f64, a1: f64, b_max: f64) -> Vec<Vec<(f64, f64)>> {
    let mut out = Vec::new();
    let top = b_max.max(2.0) * 2.0;
    for n in (a0.floor() as i64 - 1)..=(a1.ceil() as i64 + 1) {
        let n = n as f64;
        out.push(vec![(n + 0.5, 0.75f64.sqrt()), (n + 0.5, top)]);
        out.push(
            (0..=60)
                .map(|i| {
                    let th = std::f64::consts::PI * (60.0 + 60.0 * i as f64 / 60.0) / 180.0;
                    (n + th.cos(), th.sin())
                })
                .collect(),
        );
    }
    out
}

/// Uses a logarithmic time axis when the positive times span over three decades.
fn wants_log_time(records: &[TraceRecord]) -> bool {
    let pos: Vec<f64> = records.iter().map(|r| r.t).filter(|t| *t > 0.0).collect();
    match (pos.first(), pos.last()) {
        (Some(a), Some(b)) => b / a > 1e3,
        _ => false,
    }
}

/// Writes the standard plot set for a trace into `dir`. Returns the written
/// files and any warnings; an empty trace produces no files.
pub fn emit_plots(
    dir: &Path,
    trace: &FlowTrace,
    tail_fraction: f64,
    abs_tol: f64,
) -> Result<(Vec<PathBuf>, Vec<String>), RunError> {
    let recs = &trace.records;
    if recs.is_empty() {
        return Ok((vec![], vec!["trace is empty; plots skipped".into()]));
    }
    let log_t = wants_log_time(recs);
    let time = |f: &dyn Fn(&TraceRecord) -> f64| -> Vec<(f64, f64)> { recs.iter().map(|r| (r.t, f(r))).collect() };
    let mut figures = vec![
        (
            "energy.svg",
            Figure {
                title: "Energy".into(),
                x_label: "t".into(),
                y_label: "E".into(),
                log_x: log_t,
                series: vec![Series::line("E(t)", time(&|r| r.energy))],
                ..Figure::default()
            },
        ),
        (
            "z.svg",
            Figure {
                title: "Target coordinate".into(),
                x_label: "t".into(),
                y_label: "z".into(),
                log_x: log_t,
                series: vec![Series::line("z(t)", time(&|r| r.z))],
                ..Figure::default()
            },
        ),
        (
            "tracking.svg",
            Figure {
                title: "Distance to the curve".into(),
                x_label: "t".into(),
                y_label: "distance".into(),
                log_x: log_t,
                series: vec![
                    Series::line("d_WP(g, G_z)", time(&|r| tracking_residual(r).0)),
                    Series::line("2√2 (E − 1)^½", time(&|r| tracking_residual(r).1)),
                ],
                ..Figure::default()
            },
        ),
    ];
    let (a0, a1) = recs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| (lo.min(r.a), hi.max(r.a)));
    let b_max = recs.iter().map(|r| r.b).fold(0.0, f64::max);
    figures.push((
        "path.svg",
        Figure {
            title: "Metric path in the upper half-plane".into(),
            x_label: "a".into(),
            y_label: "b".into(),
            series: vec![Series::line("(a, b)", recs.iter().map(|r| (r.a, r.b)).collect())],
            overlay: fundamental_domain_overlay(a0, a1, b_max),
            ..Figure::default()
        },
    ));
    let mut warnings = Vec::new();
    match lojasiewicz_fit(trace, tail_fraction, abs_tol) {
        Ok(fit) => {
            let (g0, g1) = fit
                .points
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.0), hi.max(p.0)));
            let line = vec![
                (g0.exp(), (fit.slope * g0 + fit.intercept).exp()),
                (g1.exp(), (fit.slope * g1 + fit.intercept).exp()),
            ];
            figures.push((
                "lojasiewicz.svg",
                Figure {
                    title: format!("Łojasiewicz fit, alpha = {:.4}", fit.alpha_hat),
                    x_label: "|∇E|".into(),
                    y_label: "E − E_∞".into(),
                    log_x: true,
                    log_y: true,
                    series: vec![
                        Series::scatter("tail records", fit.points.iter().map(|p| (p.0.exp(), p.1.exp())).collect()),
                        Series::line("least squares", line),
                    ],
                    ..Figure::default()
                },
            ));
        }
        Err(e) => warnings.push(format!("lojasiewicz plot skipped: {e}")),
    }
    let mut written = Vec::new();
    for (name, fig) in figures {
        let path = dir.join(name);
        std::fs::write(&path, render(&fig)).map_err(|e| RunError::io(&path, e))?;
        written.push(path);
    }
    Ok((written, warnings))
}
