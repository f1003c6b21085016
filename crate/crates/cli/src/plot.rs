//! Two-panel SVG figure: (a) semilog error per iteration, (b) the 2-D
//! trajectory over both constraint sets. Output depends only on the input
//! traces, so identical inputs give byte-identical files.

use std::fmt::Write;

use crm_core::problems::Problem;
use crm_core::FeasibleSet;

use crate::trace_io::TraceFile;

const WIDTH: f64 = 1000.0;
const HEIGHT: f64 = 440.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];
/// Errors below this are drawn on the floor of the log axis.
const LOG_FLOOR: f64 = 1e-17;

#[derive(Clone, Copy)]
struct Panel {
    x0: f64,
    y0: f64,
    w: f64,
    h: f64,
}

const PANEL_A: Panel = Panel { x0: 70.0, y0: 40.0, w: 390.0, h: 350.0 };
const PANEL_B: Panel = Panel { x0: 570.0, y0: 40.0, w: 390.0, h: 350.0 };

/// Affine map from data coordinates into a panel; SVG `y` grows downwards.
struct Frame {
    panel: Panel,
    xlo: f64,
    xhi: f64,
    ylo: f64,
    yhi: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        self.panel.x0 + (x - self.xlo) / (self.xhi - self.xlo) * self.panel.w
    }

    fn py(&self, y: f64) -> f64 {
        self.panel.y0 + (self.yhi - y) / (self.yhi - self.ylo) * self.panel.h
    }

    fn polyline(&self, pts: impl IntoIterator<Item = (f64, f64)>) -> String {
        let mut s = String::new();
        for (x, y) in pts {
            if !s.is_empty() {
                s.push(' ');
            }
            let _ = write!(s, "{:.2},{:.2}", self.px(x), self.py(y));
        }
        s
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn frame_box(svg: &mut String, p: Panel, title: &str) {
    let _ = writeln!(
        svg,
        r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="#444"/>"##,
        p.x0, p.y0, p.w, p.h
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" font-size="14" text-anchor="middle">{}</text>"#,
        p.x0 + p.w / 2.0,
        p.y0 - 12.0,
        escape(title)
    );
}

fn error_panel(svg: &mut String, traces: &[(String, TraceFile)]) {
    let logs: Vec<Vec<f64>> = traces
        .iter()
        .map(|(_, t)| t.error_series().iter().map(|&e| e.max(LOG_FLOOR).log10()).collect())
        .collect();
    let n_max = traces.iter().map(|(_, t)| t.rows.len()).max().unwrap_or(1).saturating_sub(1).max(1);
    let all = logs.iter().flatten().copied().filter(|v| v.is_finite());
    let (lo, hi) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let (mut lo, mut hi) = if lo.is_finite() { (lo.floor(), hi.ceil()) } else { (-1.0, 0.0) };
    if hi - lo < 1.0 {
        lo -= 1.0;
        hi += 1.0;
    }
    let f = Frame { panel: PANEL_A, xlo: 0.0, xhi: n_max as f64, ylo: lo, yhi: hi };

    frame_box(svg, PANEL_A, "(a) error vs iteration");
    let decades = (hi - lo) as i64;
    let step = (decades / 8 + 1).max(1);
    let mut d = lo as i64;
    while d <= hi as i64 {
        let y = f.py(d as f64);
        let _ = writeln!(
            svg,
            r##"<line x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#ddd"/><text x="{:.2}" y="{:.2}" font-size="11" text-anchor="end">1e{d}</text>"##,
            PANEL_A.x0,
            PANEL_A.x0 + PANEL_A.w,
            PANEL_A.x0 - 6.0,
            y + 4.0
        );
        d += step;
    }
    let xstep = (n_max / 8 + 1).max(1);
    for k in (0..=n_max).step_by(xstep) {
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="middle">{k}</text>"#,
            f.px(k as f64),
            PANEL_A.y0 + PANEL_A.h + 16.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="middle">iteration</text>"#,
        PANEL_A.x0 + PANEL_A.w / 2.0,
        PANEL_A.y0 + PANEL_A.h + 34.0
    );

    for (i, ((label, _), series)) in traces.iter().zip(&logs).enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts = f.polyline(series.iter().enumerate().map(|(k, &v)| (k as f64, v)));
        let _ = writeln!(svg, r#"<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>"#);
        let ly = PANEL_A.y0 + 16.0 + 16.0 * i as f64;
        let lx = PANEL_A.x0 + PANEL_A.w - 120.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{color}" stroke-width="2"/><text x="{:.2}" y="{:.2}" font-size="11">{}</text>"#,
            ly - 4.0,
            lx + 18.0,
            ly - 4.0,
            lx + 24.0,
            ly,
            escape(label)
        );
    }
}

fn set_outline(f: &Frame, set: &FeasibleSet) -> Option<Vec<(f64, f64)>> {
    const SAMPLES: usize = 400;
    match set {
        FeasibleSet::Hyperplane(h) => {
            let n = h.normal().coords();
            let (c, dir) = (h.offset(), (-n[1], n[0]));
            let span = (f.xhi - f.xlo).abs() + (f.yhi - f.ylo).abs() + c.abs();
            let base = (c * n[0], c * n[1]);
            Some(vec![
                (base.0 - span * dir.0, base.1 - span * dir.1),
                (base.0 + span * dir.0, base.1 + span * dir.1),
            ])
        }
        FeasibleSet::Graph(g) => {
            let lo = g.domain().lo().max(f.xlo);
            let hi = g.domain().hi().min(f.xhi);
            if lo > hi {
                return None;
            }
            let pts: Vec<(f64, f64)> = (0..=SAMPLES)
                .map(|k| lo + (hi - lo) * k as f64 / SAMPLES as f64)
                .filter_map(|t| g.eval(t).ok().map(|y| (t, y)))
                .collect();
            Some(pts)
        }
        FeasibleSet::Sphere(s) => {
            let c = s.center().coords();
            let r = s.radius();
            Some(
                (0..=SAMPLES)
                    .map(|k| {
                        let th = std::f64::consts::TAU * k as f64 / SAMPLES as f64;
                        (c[0] + r * th.cos(), c[1] + r * th.sin())
                    })
                    .collect(),
            )
        }
    }
}

fn trajectory_panel(svg: &mut String, traces: &[(String, TraceFile)]) {
    frame_box(svg, PANEL_B, "(b) trajectory");
    if traces.iter().any(|(_, t)| t.dim() != 2) {
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="middle">trajectory needs 2-D iterates</text>"#,
            PANEL_B.x0 + PANEL_B.w / 2.0,
            PANEL_B.y0 + PANEL_B.h / 2.0
        );
        return;
    }
    let problem: Option<&Problem> = traces.iter().find_map(|(_, t)| t.problem.as_ref());
    let mut pts: Vec<(f64, f64)> = traces
        .iter()
        .flat_map(|(_, t)| t.rows.iter().map(|r| (r.coords[0], r.coords[1])))
        .filter(|(x, y)| x.is_finite() && y.is_finite())
        .collect();
    if let Some(p) = problem {
        pts.extend(p.known_solutions().iter().filter(|s| s.dim() == 2).map(|s| (s.coords()[0], s.coords()[1])));
    }
    let (mut xlo, mut xhi, mut ylo, mut yhi) = pts.iter().fold(
        (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY),
        |(a, b, c, d), &(x, y)| (a.min(x), b.max(x), c.min(y), d.max(y)),
    );
    if !xlo.is_finite() {
        (xlo, xhi, ylo, yhi) = (-1.0, 1.0, -1.0, 1.0);
    }
    let pad = |lo: f64, hi: f64| {
        let w = (hi - lo).max(1e-9 * (1.0 + lo.abs().max(hi.abs())));
        let w = if w > 0.0 { w } else { 1.0 };
        (lo - 0.1 * w, hi + 0.1 * w)
    };
    let (xlo, xhi) = pad(xlo, xhi);
    let (ylo, yhi) = pad(ylo, yhi);
    let f = Frame { panel: PANEL_B, xlo, xhi, ylo, yhi };

    let _ = writeln!(
        svg,
        r#"<clipPath id="clip-b"><rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}"/></clipPath>"#,
        PANEL_B.x0, PANEL_B.y0, PANEL_B.w, PANEL_B.h
    );
    let _ = writeln!(svg, r#"<g clip-path="url(#clip-b)">"#);
    if let Some(p) = problem {
        for (set, color, name) in [(p.a(), "#555", "A"), (p.b(), "#999", "B")] {
            if let Some(outline) = set_outline(&f, set) {
                let _ = writeln!(
                    svg,
                    r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.2" data-set="{name}"/>"#,
                    f.polyline(outline)
                );
            }
        }
        for s in p.known_solutions().iter().filter(|s| s.dim() == 2) {
            let c = s.coords();
            let _ = writeln!(
                svg,
                r#"<circle cx="{:.2}" cy="{:.2}" r="4" fill="none" stroke="black"/>"#,
                f.px(c[0]),
                f.py(c[1])
            );
        }
    }
    for (i, (_, t)) in traces.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let path = f.polyline(t.rows.iter().map(|r| (r.coords[0], r.coords[1])));
        let _ = writeln!(svg, r#"<polyline points="{path}" fill="none" stroke="{color}" stroke-width="1"/>"#);
        for r in &t.rows {
            let _ = writeln!(
                svg,
                r#"<circle cx="{:.2}" cy="{:.2}" r="2" fill="{color}"/>"#,
                f.px(r.coords[0]),
                f.py(r.coords[1])
            );
        }
    }
    let _ = writeln!(svg, "</g>");
    for (x, anchor, text) in [(PANEL_B.x0, "start", format!("{xlo:.3e}")), (PANEL_B.x0 + PANEL_B.w, "end", format!("{xhi:.3e}"))] {
        let _ = writeln!(
            svg,
            r#"<text x="{x:.2}" y="{:.2}" font-size="11" text-anchor="{anchor}">{text}</text>"#,
            PANEL_B.y0 + PANEL_B.h + 16.0
        );
    }
    for (y, text) in [(PANEL_B.y0 + PANEL_B.h, format!("{ylo:.3e}")), (PANEL_B.y0 + 10.0, format!("{yhi:.3e}"))] {
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{y:.2}" font-size="11" text-anchor="end">{text}</text>"#,
            PANEL_B.x0 - 6.0
        );
    }
}

/// Render labelled traces. Callers guarantee every trace has at least one row.
pub fn render(traces: &[(String, TraceFile)]) -> String {
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    error_panel(&mut svg, traces);
    trajectory_panel(&mut svg, traces);
    svg.push_str("</svg>\n");
    svg
}
