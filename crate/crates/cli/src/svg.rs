//! Minimal deterministic SVG line charts. Every coordinate is printed with
//! two decimals so identical data always yields identical bytes.

use std::fmt::Write;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 450.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 55.0;

pub struct Series<'a> {
    pub label: &'a str,
    pub color: &'a str,
    pub points: Vec<(f64, f64)>,
    /// Draw as a step function (hold until the next x).
    pub steps: bool,
}

/// A filled region between `lower` and `upper`, sampled at the same x values.
pub struct Band<'a> {
    pub label: &'a str,
    pub color: &'a str,
    pub x: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

pub struct Chart<'a> {
    pub title: &'a str,
    pub x_label: &'a str,
    pub y_label: &'a str,
    pub bands: Vec<Band<'a>>,
    pub series: Vec<Series<'a>>,
}

struct Scale {
    lo: f64,
    hi: f64,
    px_lo: f64,
    px_hi: f64,
}

impl Scale {
    fn map(&self, v: f64) -> f64 {
        self.px_lo + (v - self.lo) / (self.hi - self.lo) * (self.px_hi - self.px_lo)
    }
}

/// Round tick spacing (1, 2 or 5 times a power of ten) giving about
/// `target` intervals.
fn tick_step(span: f64, target: f64) -> f64 {
    let raw = span / target;
    let mag = 10f64.powf(raw.log10().floor());
    let norm = raw / mag;
    let nice = if norm < 1.5 {
        1.0
    } else if norm < 3.5 {
        2.0
    } else if norm < 7.5 {
        5.0
    } else {
        10.0
    };
    nice * mag
}

fn padded_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() || !hi.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        let pad = lo.abs().max(1.0) * 0.05;
        return (lo - pad, hi + pad);
    }
    let pad = (hi - lo) * 0.05;
    (lo - pad, hi + pad)
}

fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let step = tick_step(hi - lo, 6.0);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|i| i as f64 * step).collect()
}

fn fmt_tick(v: f64) -> String {
    let s = format!("{v:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.into() }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

impl Chart<'_> {
    pub fn render(&self) -> String {
        let xs = self
            .series
            .iter()
            .flat_map(|s| s.points.iter().map(|p| p.0))
            .chain(self.bands.iter().flat_map(|b| b.x.iter().copied()));
        let (x_lo, x_hi) = padded_range(xs);
        let ys = self
            .series
            .iter()
            .flat_map(|s| s.points.iter().map(|p| p.1))
            .chain(self.bands.iter().flat_map(|b| b.lower.iter().chain(&b.upper).copied()));
        let (y_lo, y_hi) = padded_range(ys);
        let sx = Scale { lo: x_lo, hi: x_hi, px_lo: LEFT, px_hi: WIDTH - RIGHT };
        let sy = Scale { lo: y_lo, hi: y_hi, px_lo: HEIGHT - BOTTOM, px_hi: TOP };

        let mut svg = String::new();
        let _ = writeln!(
            svg,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
            WIDTH / 2.0,
            escape(self.title)
        );

        // Grid and tick labels.
        for t in ticks(x_lo, x_hi) {
            let x = sx.map(t);
            let _ = writeln!(
                svg,
                r##"<line x1="{x:.2}" y1="{TOP:.2}" x2="{x:.2}" y2="{:.2}" stroke="#e0e0e0"/>"##,
                HEIGHT - BOTTOM
            );
            let _ = writeln!(
                svg,
                r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
                HEIGHT - BOTTOM + 16.0,
                fmt_tick(t)
            );
        }
        for t in ticks(y_lo, y_hi) {
            let y = sy.map(t);
            let _ = writeln!(
                svg,
                r##"<line x1="{LEFT:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#e0e0e0"/>"##,
                WIDTH - RIGHT
            );
            let _ = writeln!(
                svg,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
                LEFT - 6.0,
                y + 4.0,
                fmt_tick(t)
            );
        }
        let _ = writeln!(
            svg,
            r#"<rect x="{LEFT:.2}" y="{TOP:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#,
            WIDTH - LEFT - RIGHT,
            HEIGHT - TOP - BOTTOM
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            (LEFT + WIDTH - RIGHT) / 2.0,
            HEIGHT - 12.0,
            escape(self.x_label)
        );
        let _ = writeln!(
            svg,
            r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
            (TOP + HEIGHT - BOTTOM) / 2.0,
            (TOP + HEIGHT - BOTTOM) / 2.0,
            escape(self.y_label)
        );

        for band in &self.bands {
            let mut pts: Vec<String> = band
                .x
                .iter()
                .zip(&band.upper)
                .map(|(x, y)| format!("{:.2},{:.2}", sx.map(*x), sy.map(*y)))
                .collect();
            pts.extend(
                band.x
                    .iter()
                    .zip(&band.lower)
                    .rev()
                    .map(|(x, y)| format!("{:.2},{:.2}", sx.map(*x), sy.map(*y))),
            );
            let _ = writeln!(
                svg,
                r#"<polygon class="band" points="{}" fill="{}" fill-opacity="0.35" stroke="none"/>"#,
                pts.join(" "),
                band.color
            );
        }
        for s in &self.series {
            let mut pts = Vec::with_capacity(s.points.len() * 2);
            for (i, (x, y)) in s.points.iter().enumerate() {
                if s.steps && i > 0 {
                    pts.push(format!("{:.2},{:.2}", sx.map(*x), sy.map(s.points[i - 1].1)));
                }
                pts.push(format!("{:.2},{:.2}", sx.map(*x), sy.map(*y)));
            }
            let _ = writeln!(
                svg,
                r#"<polyline class="series" points="{}" fill="none" stroke="{}" stroke-width="1.5"/>"#,
                pts.join(" "),
                s.color
            );
        }

        // Legend.
        let entries = self
            .bands
            .iter()
            .map(|b| (b.label, b.color, true))
            .chain(self.series.iter().map(|s| (s.label, s.color, false)));
        for (i, (label, color, filled)) in entries.enumerate() {
            let y = TOP + 14.0 + 18.0 * i as f64;
            let x = LEFT + 12.0;
            if filled {
                let _ = writeln!(
                    svg,
                    r#"<rect x="{x:.2}" y="{:.2}" width="20" height="10" fill="{color}" fill-opacity="0.35"/>"#,
                    y - 8.0
                );
            } else {
                let _ = writeln!(
                    svg,
                    r#"<line x1="{x:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{color}" stroke-width="2"/>"#,
                    y - 3.0,
                    x + 20.0,
                    y - 3.0
                );
            }
            let _ = writeln!(svg, r#"<text x="{:.2}" y="{y:.2}">{}</text>"#, x + 26.0, escape(label));
        }
        svg.push_str("</svg>\n");
        svg
    }
}
