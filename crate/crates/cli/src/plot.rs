//! A small SVG emitter for line, bar and box charts.
//!
//! Output is a pure function of the input, with coordinates printed at fixed
//! precision, so reruns are byte-identical.

use sentalpha_core::backtest::BoxStats;
use std::fmt::Write;

const W: f64 = 720.0;
const H: f64 = 400.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 16.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 48.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

struct Frame {
    lo: f64,
    hi: f64,
    out: String,
}

impl Frame {
    fn new(title: &str, y_label: &str, lo: f64, hi: f64) -> Self {
        let (lo, hi) = if hi > lo {
            let pad = (hi - lo) * 0.05;
            (lo - pad, hi + pad)
        } else {
            (lo - 1.0, hi + 1.0)
        };
        let mut out = String::new();
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#
        );
        let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
            W / 2.0,
            esc(title)
        );
        let _ = writeln!(
            out,
            r#"<text x="14" y="{:.1}" transform="rotate(-90 14 {:.1})" text-anchor="middle">{}</text>"#,
            H / 2.0,
            H / 2.0,
            esc(y_label)
        );
        let mut f = Frame { lo, hi, out };
        f.axes();
        f
    }

    fn y(&self, v: f64) -> f64 {
        TOP + (self.hi - v) / (self.hi - self.lo) * (H - TOP - BOTTOM)
    }

    fn axes(&mut self) {
        let (x0, x1, y1) = (LEFT, W - RIGHT, H - BOTTOM);
        let _ = writeln!(
            self.out,
            r#"<path d="M{x0:.1},{TOP:.1} L{x0:.1},{y1:.1} L{x1:.1},{y1:.1}" fill="none" stroke="black"/>"#
        );
        for k in 0..=4 {
            let v = self.lo + (self.hi - self.lo) * k as f64 / 4.0;
            let y = self.y(v);
            let _ = writeln!(
                self.out,
                r##"<line x1="{:.1}" y1="{y:.1}" x2="{x1:.1}" y2="{y:.1}" stroke="#dddddd"/><text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"##,
                x0,
                x0 - 4.0,
                y + 4.0,
                tick(v)
            );
        }
        if self.lo < 0.0 && self.hi > 0.0 {
            let y = self.y(0.0);
            let _ = writeln!(
                self.out,
                r##"<line x1="{x0:.1}" y1="{y:.1}" x2="{x1:.1}" y2="{y:.1}" stroke="#888888"/>"##
            );
        }
    }

    fn x_label(&mut self, x: f64, text: &str) {
        let _ = writeln!(
            self.out,
            r#"<text x="{x:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            H - BOTTOM + 16.0,
            esc(text)
        );
    }

    fn legend(&mut self, names: &[&str]) {
        for (i, n) in names.iter().enumerate() {
            let y = TOP + 8.0 + 16.0 * i as f64;
            let x = W - RIGHT - 150.0;
            let _ = writeln!(
                self.out,
                r#"<rect x="{x:.1}" y="{:.1}" width="10" height="10" fill="{}"/><text x="{:.1}" y="{:.1}">{}</text>"#,
                y - 9.0,
                PALETTE[i % PALETTE.len()],
                x + 14.0,
                y,
                esc(n)
            );
        }
    }

    fn finish(mut self) -> String {
        self.out.push_str("</svg>\n");
        self.out
    }
}

fn tick(v: f64) -> String {
    if v.abs() >= 1000.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

fn bounds<'a>(values: impl Iterator<Item = &'a f64>) -> (f64, f64) {
    values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

fn x_at(i: usize, n: usize) -> f64 {
    let span = W - LEFT - RIGHT;
    if n <= 1 {
        LEFT + span / 2.0
    } else {
        LEFT + span * i as f64 / (n - 1) as f64
    }
}

/// One polyline per series over shared x labels; at most ~8 labels are drawn.
pub fn line_chart(title: &str, y_label: &str, x_labels: &[String], series: &[(&str, &[f64])]) -> String {
    let (mut lo, mut hi) = bounds(series.iter().flat_map(|(_, v)| v.iter()));
    if !lo.is_finite() {
        (lo, hi) = (0.0, 1.0);
    }
    let mut f = Frame::new(title, y_label, lo, hi);
    let n = x_labels.len();
    let step = n.div_ceil(8).max(1);
    for i in (0..n).step_by(step) {
        f.x_label(x_at(i, n), &x_labels[i]);
    }
    for (k, (_, values)) in series.iter().enumerate() {
        let mut d = String::new();
        let mut pen_down = false;
        for (i, v) in values.iter().enumerate() {
            if !v.is_finite() {
                pen_down = false;
                continue;
            }
            let _ = write!(d, "{}{:.1},{:.1} ", if pen_down { "L" } else { "M" }, x_at(i, values.len()), f.y(*v));
            pen_down = true;
        }
        let _ = writeln!(
            f.out,
            r#"<path d="{}" fill="none" stroke="{}" stroke-width="1.5"/>"#,
            d.trim_end(),
            PALETTE[k % PALETTE.len()]
        );
    }
    if series.len() > 1 {
        f.legend(&series.iter().map(|s| s.0).collect::<Vec<_>>());
    }
    f.finish()
}

/// Vertical bars; non-finite values are left blank.
pub fn bar_chart(title: &str, y_label: &str, labels: &[String], values: &[f64]) -> String {
    let (lo, hi) = bounds(values.iter());
    let (lo, hi) = if lo.is_finite() { (lo.min(0.0), hi.max(0.0)) } else { (0.0, 1.0) };
    let mut f = Frame::new(title, y_label, lo, hi);
    let n = values.len().max(1);
    let slot = (W - LEFT - RIGHT) / n as f64;
    let step = n.div_ceil(16).max(1);
    let base = f.y(0.0);
    for (i, v) in values.iter().enumerate() {
        let cx = LEFT + slot * (i as f64 + 0.5);
        if v.is_finite() {
            let y = f.y(*v);
            let _ = writeln!(
                f.out,
                r#"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="{}"/>"#,
                cx - slot * 0.35,
                y.min(base),
                slot * 0.7,
                (y - base).abs(),
                PALETTE[0]
            );
        }
        if i % step == 0 {
            f.x_label(cx, &labels[i]);
        }
    }
    f.finish()
}

/// Box-and-whisker glyphs from precomputed statistics.
pub fn box_chart(title: &str, y_label: &str, boxes: &[(&str, BoxStats)]) -> String {
    let (mut lo, mut hi) = bounds(boxes.iter().flat_map(|(_, b)| [&b.min, &b.max]));
    if !lo.is_finite() {
        (lo, hi) = (0.0, 1.0);
    }
    let mut f = Frame::new(title, y_label, lo, hi);
    let n = boxes.len().max(1);
    let slot = (W - LEFT - RIGHT) / n as f64;
    for (i, (name, b)) in boxes.iter().enumerate() {
        let cx = LEFT + slot * (i as f64 + 0.5);
        let half = slot * 0.2;
        let color = PALETTE[i % PALETTE.len()];
        let _ = writeln!(
            f.out,
            r#"<line x1="{cx:.1}" y1="{:.1}" x2="{cx:.1}" y2="{:.1}" stroke="black"/>"#,
            f.y(b.max),
            f.y(b.min)
        );
        let _ = writeln!(
            f.out,
            r#"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="{color}" fill-opacity="0.5" stroke="black"/>"#,
            cx - half,
            f.y(b.q3),
            2.0 * half,
            (f.y(b.q1) - f.y(b.q3)).max(0.0)
        );
        let _ = writeln!(
            f.out,
            r#"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="black" stroke-width="2"/>"#,
            cx - half,
            f.y(b.median),
            cx + half,
            f.y(b.median)
        );
        f.x_label(cx, name);
    }
    f.finish()
}
