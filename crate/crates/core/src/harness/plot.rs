//! Minimal SVG output: log-log scatter plots and boundary polylines.

use std::fmt::Write;

use super::FitResult;
use crate::geometry::Curves;

const W: f64 = 640.0;
const H: f64 = 480.0;
const PAD: f64 = 60.0;

struct Frame {
    x: [f64; 2],
    y: [f64; 2],
}

impl Frame {
    fn map(&self, p: [f64; 2]) -> [f64; 2] {
        let sx = (p[0] - self.x[0]) / (self.x[1] - self.x[0]).max(1e-300);
        let sy = (p[1] - self.y[0]) / (self.y[1] - self.y[0]).max(1e-300);
        [PAD + sx * (W - 2.0 * PAD), H - PAD - sy * (H - 2.0 * PAD)]
    }
}

fn bounds(pts: impl Iterator<Item = [f64; 2]>) -> Frame {
    let mut f = Frame {
        x: [f64::INFINITY, f64::NEG_INFINITY],
        y: [f64::INFINITY, f64::NEG_INFINITY],
    };
    for p in pts {
        f.x = [f.x[0].min(p[0]), f.x[1].max(p[0])];
        f.y = [f.y[0].min(p[1]), f.y[1].max(p[1])];
    }
    f
}

fn header(title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="30" font-family="sans-serif" font-size="16" text-anchor="middle">{}</text>"#,
        W / 2.0,
        escape(title)
    );
    s
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Log-log scatter of `(x, y)` with an optional fitted line.
pub fn loglog_svg(title: &str, xs: &[f64], ys: &[f64], fit: Option<&FitResult>) -> String {
    let pts: Vec<[f64; 2]> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0)
        .map(|(x, y)| [x.log10(), y.log10()])
        .collect();
    let frame = bounds(pts.iter().copied());
    let mut s = header(title);
    let _ = writeln!(
        s,
        r#"<rect x="{PAD}" y="{PAD}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - 2.0 * PAD,
        H - 2.0 * PAD
    );
    for (v, anchor) in [(frame.x[0], "start"), (frame.x[1], "end")] {
        let p = frame.map([v, frame.y[0]]);
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="12" text-anchor="{anchor}">1e{v:.2}</text>"#,
            p[0],
            H - PAD + 18.0
        );
    }
    for v in [frame.y[0], frame.y[1]] {
        let p = frame.map([frame.x[0], v]);
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="12" text-anchor="end">1e{v:.2}</text>"#,
            PAD - 6.0,
            p[1] + 4.0
        );
    }
    for p in &pts {
        let q = frame.map(*p);
        let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="4" fill="steelblue"/>"#, q[0], q[1]);
    }
    if let Some(f) = fit {
        let line = |lx: f64| {
            let x = 10f64.powf(lx);
            frame.map([lx, f.predict(x).log10()])
        };
        let (a, b) = (line(frame.x[0]), line(frame.x[1]));
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="firebrick" stroke-width="1.5"/>"#,
            a[0], a[1], b[0], b[1]
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="13" text-anchor="end">slope {:.4}, r² {:.4}</text>"#,
            W - PAD,
            PAD - 8.0,
            f.slope,
            f.r_squared
        );
    }
    s.push_str("</svg>\n");
    s
}

/// The three boundary polylines, equal aspect ratio.
pub fn curves_svg(title: &str, curves: &Curves) -> String {
    let all = curves.d1.iter().chain(&curves.d2).chain(&curves.outer).copied();
    let mut frame = bounds(all);
    let span = (frame.x[1] - frame.x[0]).max(frame.y[1] - frame.y[0]);
    let (cx, cy) = (0.5 * (frame.x[0] + frame.x[1]), 0.5 * (frame.y[0] + frame.y[1]));
    let aspect = (W - 2.0 * PAD) / (H - 2.0 * PAD);
    frame.x = [cx - 0.5 * span * aspect, cx + 0.5 * span * aspect];
    frame.y = [cy - 0.5 * span, cy + 0.5 * span];
    let mut s = header(title);
    for (poly, colour) in [(&curves.outer, "black"), (&curves.d1, "firebrick"), (&curves.d2, "steelblue")] {
        let mut d = String::new();
        for (k, p) in poly.iter().enumerate() {
            let q = frame.map(*p);
            let _ = write!(d, "{}{:.3},{:.3} ", if k == 0 { "M" } else { "L" }, q[0], q[1]);
        }
        d.push('Z');
        let _ = writeln!(s, r#"<path d="{d}" fill="none" stroke="{colour}" stroke-width="1"/>"#);
    }
    s.push_str("</svg>\n");
    s
}
