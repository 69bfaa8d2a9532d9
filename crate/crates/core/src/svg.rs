//! Minimal SVG scatter/line figures.

use std::fmt::Write;

#[derive(Debug, Clone, Default)]
pub struct Figure {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    /// Plot x on a log10 axis.
    pub x_log10: bool,
    pub points: Vec<(f64, f64)>,
    pub point_labels: Vec<String>,
    /// Polyline in data coordinates (e.g. a fitted curve).
    pub line: Vec<(f64, f64)>,
    /// Horizontal segments `(x0, x1, y)`, e.g. group means.
    pub segments: Vec<(f64, f64, f64)>,
    /// Replace numeric x ticks with category names.
    pub x_categories: Vec<(f64, String)>,
    pub annotation: Option<String>,
    /// Emitted as a leading XML comment when present.
    pub timestamp: Option<String>,
}

const W: f64 = 640.0;
const H: f64 = 440.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        let pad = if lo == 0.0 { 1.0 } else { lo.abs() * 0.1 };
        return (lo - pad, hi + pad);
    }
    let pad = (hi - lo) * 0.08;
    (lo - pad, hi + pad)
}

fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = hi - lo;
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| span / s <= 6.0).unwrap_or(10.0 * mag);
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + step * 1e-9 {
        out.push(if t.abs() < step * 1e-9 { 0.0 } else { t });
        t += step;
    }
    out
}

fn fmt_tick(v: f64) -> String {
    let s = format!("{v:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.to_string() }
}

impl Figure {
    fn tx(&self, x: f64) -> f64 {
        if self.x_log10 {
            x.log10()
        } else {
            x
        }
    }

    pub fn render(&self) -> String {
        let xs = self
            .points
            .iter()
            .chain(&self.line)
            .map(|p| self.tx(p.0))
            .chain(self.segments.iter().flat_map(|s| [s.0, s.1]))
            .chain(self.x_categories.iter().map(|c| c.0));
        let (x0, x1) = range(xs);
        let ys = self
            .points
            .iter()
            .chain(&self.line)
            .map(|p| p.1)
            .chain(self.segments.iter().map(|s| s.2));
        let (y0, y1) = range(ys);
        let pw = W - LEFT - RIGHT;
        let ph = H - TOP - BOTTOM;
        let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
        let sy = |y: f64| TOP + ph - (y - y0) / (y1 - y0) * ph;

        let mut s = String::new();
        if let Some(ts) = &self.timestamp {
            writeln!(s, "<!-- generated {} -->", escape(ts)).unwrap();
        }
        writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
        )
        .unwrap();
        writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#).unwrap();
        writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#, W / 2.0, escape(&self.title)).unwrap();
        writeln!(
            s,
            r##"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="#333"/>"##
        )
        .unwrap();

        if self.x_categories.is_empty() {
            for t in ticks(x0, x1) {
                let label = if self.x_log10 { format!("1e{}", fmt_tick(t)) } else { fmt_tick(t) };
                writeln!(
                    s,
                    r##"<line x1="{x:.2}" y1="{y:.2}" x2="{x:.2}" y2="{y2:.2}" stroke="#333"/><text x="{x:.2}" y="{ty:.2}" text-anchor="middle">{label}</text>"##,
                    x = sx(t),
                    y = TOP + ph,
                    y2 = TOP + ph + 5.0,
                    ty = TOP + ph + 18.0
                )
                .unwrap();
            }
        } else {
            for (x, name) in &self.x_categories {
                writeln!(
                    s,
                    r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
                    sx(*x),
                    TOP + ph + 18.0,
                    escape(name)
                )
                .unwrap();
            }
        }
        for t in ticks(y0, y1) {
            writeln!(
                s,
                r##"<line x1="{x2:.2}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}" stroke="#333"/><text x="{tx:.2}" y="{ty:.2}" text-anchor="end">{label}</text>"##,
                x2 = LEFT - 5.0,
                y = sy(t),
                tx = LEFT - 8.0,
                ty = sy(t) + 4.0,
                label = fmt_tick(t)
            )
            .unwrap();
        }
        writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            LEFT + pw / 2.0,
            H - 14.0,
            escape(&self.x_label)
        )
        .unwrap();
        writeln!(
            s,
            r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
            TOP + ph / 2.0,
            TOP + ph / 2.0,
            escape(&self.y_label)
        )
        .unwrap();

        if self.line.len() >= 2 {
            let pts: Vec<String> = self
                .line
                .iter()
                .map(|&(x, y)| format!("{:.2},{:.2}", sx(self.tx(x)), sy(y)))
                .collect();
            writeln!(s, r##"<polyline points="{}" fill="none" stroke="#c0392b" stroke-width="2"/>"##, pts.join(" ")).unwrap();
        }
        for &(a, b, y) in &self.segments {
            writeln!(
                s,
                r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#c0392b" stroke-width="2"/>"##,
                sx(a),
                sy(y),
                sx(b),
                sy(y)
            )
            .unwrap();
        }
        for (i, &(x, y)) in self.points.iter().enumerate() {
            let (cx, cy) = (sx(self.tx(x)), sy(y));
            writeln!(s, r##"<circle cx="{cx:.2}" cy="{cy:.2}" r="4" fill="#2e86c1"/>"##).unwrap();
            if let Some(label) = self.point_labels.get(i).filter(|l| !l.is_empty()) {
                writeln!(
                    s,
                    r##"<text x="{:.2}" y="{:.2}" font-size="9" fill="#555">{}</text>"##,
                    cx + 6.0,
                    cy - 4.0,
                    escape(label)
                )
                .unwrap();
            }
        }
        if let Some(note) = &self.annotation {
            writeln!(s, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, LEFT + 8.0, TOP + 16.0, escape(note)).unwrap();
        }
        s.push_str("</svg>\n");
        s
    }
}
