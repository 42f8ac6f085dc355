//! Minimal hand-written SVG plots.

use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 480.0;
const PAD: f64 = 48.0;

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn fit(xs: impl Iterator<Item = f64> + Clone, ys: impl Iterator<Item = f64> + Clone, square: bool) -> Self {
        let (mut x0, mut x1) = bounds(xs);
        let (mut y0, mut y1) = bounds(ys);
        if square {
            let half = 0.5 * (x1 - x0).max(y1 - y0);
            let (cx, cy) = (0.5 * (x0 + x1), 0.5 * (y0 + y1));
            (x0, x1, y0, y1) = (cx - half, cx + half, cy - half, cy + half);
        }
        let px = 0.04 * (x1 - x0);
        let py = 0.04 * (y1 - y0);
        Frame { x0: x0 - px, x1: x1 + px, y0: y0 - py, y1: y1 + py }
    }

    fn sx(&self, x: f64) -> f64 {
        PAD + (x - self.x0) / (self.x1 - self.x0) * (W - 2.0 * PAD)
    }

    fn sy(&self, y: f64) -> f64 {
        H - PAD - (y - self.y0) / (self.y1 - self.y0) * (H - 2.0 * PAD)
    }
}

fn bounds(v: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = v.filter(|x| x.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-300 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn open(s: &mut String, f: &Frame, title: &str) {
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{PAD}" y="{PAD}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - 2.0 * PAD,
        H - 2.0 * PAD
    );
    let _ = writeln!(s, r#"<text x="{}" y="28" font-family="sans-serif" font-size="14" text-anchor="middle">{}</text>"#, W / 2.0, escape(title));
    let _ = writeln!(
        s,
        r#"<text x="{PAD}" y="{}" font-family="sans-serif" font-size="11">{:.4e}</text><text x="{}" y="{}" font-family="sans-serif" font-size="11" text-anchor="end">{:.4e}</text>"#,
        H - PAD + 16.0,
        f.x0,
        W - PAD,
        H - PAD + 16.0,
        f.x1
    );
    let _ = writeln!(
        s,
        r#"<text x="4" y="{}" font-family="sans-serif" font-size="11">{:.4e}</text><text x="4" y="{}" font-family="sans-serif" font-size="11">{:.4e}</text>"#,
        H - PAD,
        f.y0,
        PAD + 10.0,
        f.y1
    );
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Scatter of 2D points; 1D points are drawn on the axis y = 0.
pub fn scatter(points: &[(f64, f64)], title: &str) -> String {
    let f = Frame::fit(points.iter().map(|p| p.0), points.iter().map(|p| p.1), true);
    let mut s = String::new();
    open(&mut s, &f, title);
    for &(x, y) in points {
        let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="1.5" fill="black"/>"#, f.sx(x), f.sy(y));
    }
    s.push_str("</svg>\n");
    s
}

/// Line through (x, y) samples, with optional marker dots.
pub fn line(series: &[(f64, f64)], markers: &[(f64, f64)], title: &str) -> String {
    let all = series.iter().chain(markers);
    let f = Frame::fit(all.clone().map(|p| p.0), all.map(|p| p.1), false);
    let mut s = String::new();
    open(&mut s, &f, title);
    let mut d = String::new();
    for (i, &(x, y)) in series.iter().enumerate() {
        let _ = write!(d, "{}{:.2},{:.2} ", if i == 0 { "M" } else { "L" }, f.sx(x), f.sy(y));
    }
    let _ = writeln!(s, r#"<path d="{}" fill="none" stroke="black" stroke-width="1"/>"#, d.trim_end());
    for &(x, y) in markers {
        let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="blue"/>"#, f.sx(x), f.sy(y));
    }
    s.push_str("</svg>\n");
    s
}
