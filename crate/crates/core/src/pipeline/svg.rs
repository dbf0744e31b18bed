//! Minimal self-contained SVG line and bar charts.

use std::fmt::Write;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChartKind {
    Line,
    Bar,
}

#[derive(Clone, Debug)]
pub struct ChartStyle {
    pub kind: ChartKind,
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub width: u32,
    pub height: u32,
    /// Plot `log10(x)`; points with `x <= 0` are dropped.
    pub log_x: bool,
}

impl ChartStyle {
    pub fn new(kind: ChartKind, title: &str, x_label: &str, y_label: &str) -> Self {
        ChartStyle {
            kind,
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            width: 800,
            height: 400,
            log_x: false,
        }
    }

    pub fn log_x(mut self) -> Self {
        self.log_x = true;
        self
    }
}

const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 35.0;
const MARGIN_B: f64 = 50.0;
const TICKS: usize = 5;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn tick_label(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1e5 || v.abs() < 1e-2 {
        format!("{v:.2e}")
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

/// Renders `series` as an SVG document. Output depends only on the inputs.
pub fn emit_svg_chart(series: &[(f64, f64)], style: &ChartStyle) -> Result<String> {
    let pts: Vec<(f64, f64)> = series
        .iter()
        .filter(|(x, _)| !style.log_x || *x > 0.0)
        .map(|&(x, y)| (if style.log_x { x.log10() } else { x }, y))
        .collect();
    if pts.len() < 2 {
        return Err(Error::Length {
            what: "chart series",
            needed: 2,
            got: pts.len(),
        });
    }
    if pts.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(Error::DegenerateRange("series contains non-finite values".into()));
    }
    let (mut x0, mut x1) = pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| {
        (a.min(p.0), b.max(p.0))
    });
    if !(x1 > x0) {
        return Err(Error::DegenerateRange(format!("all x values equal {x0}")));
    }
    let (mut y0, mut y1) = pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| {
        (a.min(p.1), b.max(p.1))
    });
    if style.kind == ChartKind::Bar {
        y0 = y0.min(0.0);
        // half a bar of room on each side
        let step = (x1 - x0) / (pts.len() - 1) as f64;
        x0 -= step / 2.0;
        x1 += step / 2.0;
    }
    if y1 == y0 {
        y0 -= 1.0;
        y1 += 1.0;
    }

    let (w, h) = (f64::from(style.width), f64::from(style.height));
    let pw = w - MARGIN_L - MARGIN_R;
    let ph = h - MARGIN_T - MARGIN_B;
    let sx = |x: f64| MARGIN_L + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| MARGIN_T + (y1 - y) / (y1 - y0) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {} {}" font-family="sans-serif" font-size="11">"#,
        style.width, style.height, style.width, style.height
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
        w / 2.0,
        escape(&style.title)
    );
    let _ = writeln!(
        s,
        r#"<g stroke="black" fill="none"><line x1="{l:.1}" y1="{b:.1}" x2="{r:.1}" y2="{b:.1}"/><line x1="{l:.1}" y1="{t:.1}" x2="{l:.1}" y2="{b:.1}"/></g>"#,
        l = MARGIN_L,
        r = w - MARGIN_R,
        t = MARGIN_T,
        b = h - MARGIN_B
    );
    for i in 0..=TICKS {
        let f = i as f64 / TICKS as f64;
        let xv = x0 + f * (x1 - x0);
        let yv = y0 + f * (y1 - y0);
        let xl = if style.log_x { 10f64.powf(xv) } else { xv };
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            sx(xv),
            h - MARGIN_B + 15.0,
            tick_label(xl)
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
            MARGIN_L - 5.0,
            sy(yv) + 4.0,
            tick_label(yv)
        );
    }
    let x_label = if style.log_x {
        format!("{} (log scale)", style.x_label)
    } else {
        style.x_label.clone()
    };
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        MARGIN_L + pw / 2.0,
        h - 10.0,
        escape(&x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="15" y="{:.1}" text-anchor="middle" transform="rotate(-90 15 {:.1})">{}</text>"#,
        MARGIN_T + ph / 2.0,
        MARGIN_T + ph / 2.0,
        escape(&style.y_label)
    );

    match style.kind {
        ChartKind::Line => {
            let coords: Vec<String> = pts
                .iter()
                .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
                .collect();
            let _ = writeln!(
                s,
                r#"<polyline fill="none" stroke="steelblue" stroke-width="1" points="{}"/>"#,
                coords.join(" ")
            );
        }
        ChartKind::Bar => {
            let bw = (pw / pts.len() as f64 * 0.8).max(0.5);
            let base = sy(0f64.clamp(y0, y1));
            let _ = writeln!(s, r#"<g fill="steelblue">"#);
            for &(x, y) in &pts {
                let top = sy(y).min(base);
                let _ = writeln!(
                    s,
                    r#"<rect class="bar" x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}"/>"#,
                    sx(x) - bw / 2.0,
                    top,
                    bw,
                    (sy(y) - base).abs()
                );
            }
            let _ = writeln!(s, "</g>");
        }
    }
    s.push_str("</svg>\n");
    Ok(s)
}

/// Reduces a long series to at most `buckets` points, keeping in each
/// bucket the point of largest `|y|` so spikes survive.
pub fn envelope(series: &[(f64, f64)], buckets: usize) -> Vec<(f64, f64)> {
    if series.len() <= buckets || buckets == 0 {
        return series.to_vec();
    }
    let size = series.len().div_ceil(buckets);
    series
        .chunks(size)
        .map(|c| {
            *c.iter()
                .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
                .expect("chunks are nonempty")
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_point_line() {
        let svg = emit_svg_chart(&[(0.0, 0.0), (1.0, 1.0)], &ChartStyle::new(ChartKind::Line, "t", "x", "y")).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 1);
        let pts = svg.split("points=\"").nth(1).unwrap().split('"').next().unwrap();
        assert_eq!(pts.split(' ').count(), 2);
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
    }

    #[test]
    fn bar_count_matches_keys() {
        let data: Vec<(f64, f64)> = (1..=17).map(|k| (f64::from(2 * k), f64::from(k * k))).collect();
        let svg = emit_svg_chart(&data, &ChartStyle::new(ChartKind::Bar, "h", "d", "n")).unwrap();
        assert_eq!(svg.matches("class=\"bar\"").count(), 17);
    }

    #[test]
    fn errors() {
        let style = ChartStyle::new(ChartKind::Line, "t", "x", "y");
        assert!(emit_svg_chart(&[], &style).is_err());
        assert!(emit_svg_chart(&[(1.0, 2.0)], &style).is_err());
        assert!(matches!(
            emit_svg_chart(&[(1.0, 2.0), (1.0, 3.0)], &style),
            Err(Error::DegenerateRange(_))
        ));
    }

    #[test]
    fn deterministic_and_escaped() {
        let style = ChartStyle::new(ChartKind::Line, "a < b & c", "x", "y").log_x();
        let data = [(0.0, 1.0), (1.0, 2.0), (10.0, 0.5), (100.0, 3.0)];
        let a = emit_svg_chart(&data, &style).unwrap();
        assert_eq!(a, emit_svg_chart(&data, &style).unwrap());
        assert!(a.contains("a &lt; b &amp; c"));
    }

    #[test]
    fn envelope_keeps_spikes() {
        let mut data: Vec<(f64, f64)> = (0..1000).map(|i| (f64::from(i), 0.0)).collect();
        data[537].1 = -9.0;
        let e = envelope(&data, 10);
        assert_eq!(e.len(), 10);
        assert!(e.contains(&(537.0, -9.0)));
    }
}
