use std::fmt::Write as _;

use regex::Regex;

use super::{ChartConfig, Point, QuadrangleSpec};
use crate::{Error, Result};

const VIEW_W: f64 = 1000.0;
const VIEW_H: f64 = 600.0;
const LEFT: f64 = 90.0;
const RIGHT: f64 = 200.0;
const TOP: f64 = 50.0;
const BOTTOM: f64 = 60.0;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2",
];

fn stroke(i: usize) -> String {
    match PALETTE.get(i) {
        Some(c) => (*c).to_string(),
        None => format!("hsl({:.1},65%,40%)", (i as f64 * 137.508) % 360.0),
    }
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

fn unescape(s: &str) -> String {
    s.replace("&lt;", "<")
        .replace("&gt;", ">")
        .replace("&quot;", "\"")
        .replace("&apos;", "'")
        .replace("&amp;", "&")
}

/// Affine map from chart units to SVG user units.
#[derive(Debug, Clone, Copy)]
struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn width() -> f64 {
        VIEW_W - LEFT - RIGHT
    }

    fn height() -> f64 {
        VIEW_H - TOP - BOTTOM
    }

    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x0) / (self.x1 - self.x0) * Self::width()
    }

    fn py(&self, y: f64) -> f64 {
        TOP + (self.y1 - y) / (self.y1 - self.y0) * Self::height()
    }

    fn ux(&self, px: f64) -> f64 {
        self.x0 + (px - LEFT) / Self::width() * (self.x1 - self.x0)
    }

    fn uy(&self, py: f64) -> f64 {
        self.y1 - (py - TOP) / Self::height() * (self.y1 - self.y0)
    }
}

fn auto_x_range(quads: &[QuadrangleSpec], cfg: &ChartConfig) -> (f64, f64) {
    let hw = quads.iter().map(|q| q.half_width).fold(0.0, f64::max);
    let mut lo = 0.0f64;
    let mut hi = 0.0f64;
    for q in quads {
        lo = lo.min(q.cx() - q.half_width);
        hi = hi.max(q.cx() + q.half_width);
    }
    if cfg.show_ideal {
        hi = hi.max(cfg.lambda + hw);
    }
    lo = lo.min(-hw);
    let pad = 0.1 * (hi - lo).max(0.5);
    (lo - pad, hi + pad)
}

/// Tick positions at a 1-2-5 step covering `[lo, hi]`.
fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let raw = (hi - lo) / 6.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .into_iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

fn tick_label(v: f64) -> String {
    let s = format!("{:.3}", v);
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.into() }
}

fn points_attr(frame: &Frame, pts: &[Point]) -> String {
    pts.iter()
        .map(|p| format!("{:.6},{:.6}", frame.px(p.x), frame.py(p.y)))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Render the chart as a self-contained SVG document. Output depends only on
/// the inputs, so equal inputs give byte-identical files.
pub fn render_svg(quads: &[QuadrangleSpec], cfg: &ChartConfig) -> Result<String> {
    if quads.is_empty() {
        return Err(Error::Empty("no quadrangles to draw".into()));
    }
    cfg.validate()?;
    let (x0, x1) = cfg.x_range.unwrap_or_else(|| auto_x_range(quads, cfg));
    let frame = Frame { x0, x1, y0: cfg.y_range.0, y1: cfg.y_range.1 };

    let mut out = String::new();
    let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" viewBox="0 0 {VIEW_W} {VIEW_H}" width="{VIEW_W}" height="{VIEW_H}" font-family="sans-serif" font-size="13">"#
    );
    let _ = writeln!(out, r##"<rect x="0" y="0" width="{VIEW_W}" height="{VIEW_H}" fill="#ffffff"/>"##);
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="28" text-anchor="middle" font-size="16">{}</text>"#,
        LEFT + Frame::width() / 2.0,
        escape(&cfg.title)
    );
    let _ = writeln!(
        out,
        r#"<g class="plot" data-x0="{:?}" data-x1="{:?}" data-y0="{:?}" data-y1="{:?}" data-lambda="{:?}">"#,
        frame.x0, frame.x1, frame.y0, frame.y1, cfg.lambda
    );

    // axes, grid and ticks
    let (left, right) = (LEFT, LEFT + Frame::width());
    let (top, bottom) = (TOP, TOP + Frame::height());
    let _ = writeln!(
        out,
        r##"<rect x="{left}" y="{top}" width="{:.1}" height="{:.1}" fill="none" stroke="#444444"/>"##,
        Frame::width(),
        Frame::height()
    );
    for t in ticks(frame.x0, frame.x1) {
        let x = frame.px(t);
        let _ = writeln!(
            out,
            r##"<line x1="{x:.3}" y1="{top}" x2="{x:.3}" y2="{bottom}" stroke="#e6e6e6"/><text x="{x:.3}" y="{:.1}" text-anchor="middle">{}</text>"##,
            bottom + 18.0,
            tick_label(t)
        );
    }
    for t in ticks(frame.y0, frame.y1) {
        let y = frame.py(t);
        let _ = writeln!(
            out,
            r##"<line x1="{left}" y1="{y:.3}" x2="{right}" y2="{y:.3}" stroke="#e6e6e6"/><text x="{:.1}" y="{:.3}" text-anchor="end">{}</text>"##,
            left - 8.0,
            y + 4.0,
            tick_label(t.abs())
        );
    }
    let zero = frame.py(0.0);
    let _ = writeln!(
        out,
        r##"<line class="axis" x1="{left}" y1="{zero:.3}" x2="{right}" y2="{zero:.3}" stroke="#444444"/>"##
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        LEFT + Frame::width() / 2.0,
        VIEW_H - 14.0,
        escape(&cfg.x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="22" y="{:.1}" text-anchor="middle" transform="rotate(-90 22 {:.1})">{}</text>"#,
        TOP + Frame::height() / 2.0,
        TOP + Frame::height() / 2.0,
        escape(&cfg.y_label)
    );

    if cfg.show_ideal {
        let hw = quads[0].half_width;
        let l = cfg.lambda;
        let pts = [
            Point { x: l - hw, y: 1.0 },
            Point { x: l + hw, y: 1.0 },
            Point { x: l + hw, y: -1.0 },
            Point { x: l - hw, y: -1.0 },
        ];
        let _ = writeln!(
            out,
            r##"<polygon class="ideal" points="{}" fill="none" stroke="#777777" stroke-width="1.5" stroke-dasharray="6 4"/>"##,
            points_attr(&frame, &pts)
        );
    }

    for (i, q) in quads.iter().enumerate() {
        let [qp, res, wn, bv] = q.heights();
        let _ = writeln!(
            out,
            r#"<polygon class="quad" data-detector="{}" data-a-ref="{:?}" data-lambda="{:?}" data-s-qp="{:?}" data-s-res="{:?}" data-s-wn="{:?}" data-s-bv="{:?}" points="{}" fill="{}" fill-opacity="0.08" stroke="{}" stroke-width="2"/>"#,
            escape(&q.detector_id),
            q.a_ref,
            q.lambda,
            qp,
            res,
            wn,
            bv,
            points_attr(&frame, &q.vertices()),
            stroke(i),
            stroke(i)
        );
    }

    // legend
    for (i, q) in quads.iter().enumerate() {
        let y = TOP + 10.0 + 20.0 * i as f64;
        let x = right + 20.0;
        let _ = writeln!(
            out,
            r#"<line x1="{x:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="{}" stroke-width="3"/><text x="{:.1}" y="{:.1}">{}</text>"#,
            x + 24.0,
            stroke(i),
            x + 30.0,
            y + 4.0,
            escape(&q.detector_id)
        );
    }
    if cfg.show_ideal {
        let y = TOP + 10.0 + 20.0 * quads.len() as f64;
        let x = right + 20.0;
        let _ = writeln!(
            out,
            r##"<line x1="{x:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#777777" stroke-dasharray="6 4"/><text x="{:.1}" y="{:.1}">ideal</text>"##,
            x + 24.0,
            x + 30.0,
            y + 4.0
        );
    }
    out.push_str("</g>\n</svg>\n");
    Ok(out)
}

/// Geometry recovered from a rendered chart, in chart units.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedQuad {
    pub detector_id: String,
    pub cx: f64,
    /// Corner heights qp, res, wn, bv.
    pub heights: [f64; 4],
    pub vertices: [Point; 4],
}

/// Recover quadrangle geometry from polygon coordinates of a rendered chart.
/// Returns the detector glyphs and, when drawn, the ideal glyph.
pub fn parse_chart(svg: &str) -> Result<(Vec<ParsedQuad>, Option<ParsedQuad>)> {
    let num = |caps: &regex::Captures, name: &str| -> Result<f64> {
        caps[name]
            .parse::<f64>()
            .map_err(|_| Error::Format(format!("bad number in {name}")))
    };
    let plot = Regex::new(
        r#"<g class="plot" data-x0="(?P<x0>[^"]+)" data-x1="(?P<x1>[^"]+)" data-y0="(?P<y0>[^"]+)" data-y1="(?P<y1>[^"]+)""#,
    )
    .expect("static regex");
    let caps = plot
        .captures(svg)
        .ok_or_else(|| Error::Format("no plot group in chart".into()))?;
    let frame = Frame {
        x0: num(&caps, "x0")?,
        x1: num(&caps, "x1")?,
        y0: num(&caps, "y0")?,
        y1: num(&caps, "y1")?,
    };

    let poly = Regex::new(r#"<polygon class="(?P<class>quad|ideal)"(?P<attrs>[^>]*?) points="(?P<pts>[^"]+)""#)
        .expect("static regex");
    let detector = Regex::new(r#"data-detector="(?P<id>[^"]*)""#).expect("static regex");

    let mut quads = Vec::new();
    let mut ideal = None;
    for caps in poly.captures_iter(svg) {
        let mut vertices = [Point { x: 0.0, y: 0.0 }; 4];
        let coords: Vec<&str> = caps["pts"].split_whitespace().collect();
        if coords.len() != 4 {
            return Err(Error::Format(format!("polygon with {} vertices", coords.len())));
        }
        for (v, c) in vertices.iter_mut().zip(coords) {
            let (x, y) = c
                .split_once(',')
                .ok_or_else(|| Error::Format(format!("bad point {c:?}")))?;
            let parse = |s: &str| s.parse::<f64>().map_err(|_| Error::Format(format!("bad point {c:?}")));
            *v = Point { x: frame.ux(parse(x)?), y: frame.uy(parse(y)?) };
        }
        let cx = vertices.iter().map(|p| p.x).sum::<f64>() / 4.0;
        let heights = [vertices[0].y, vertices[1].y, -vertices[2].y, -vertices[3].y];
        let id = detector
            .captures(&caps["attrs"])
            .map(|d| unescape(&d["id"]))
            .unwrap_or_default();
        let parsed = ParsedQuad { detector_id: id, cx, heights, vertices };
        if &caps["class"] == "ideal" {
            ideal = Some(parsed);
        } else {
            quads.push(parsed);
        }
    }
    if quads.is_empty() {
        return Err(Error::Format("chart has no quadrangles".into()));
    }
    Ok((quads, ideal))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrangle::{quadrangle, DEFAULT_HALF_WIDTH};
    use crate::stability::StabilityVector;
    use proptest::prelude::*;

    fn cfg(lambda: f64) -> ChartConfig {
        ChartConfig { lambda, ..ChartConfig::default() }
    }

    #[test]
    fn ideal_glyph_overlays_ideal_square() {
        let q = quadrangle("ideal-det", 1.0, StabilityVector::ideal(), 5.0, DEFAULT_HALF_WIDTH).unwrap();
        let svg = render_svg(&[q], &cfg(5.0)).unwrap();
        assert_eq!(svg.matches(r#"<polygon class="quad""#).count(), 1);
        assert_eq!(svg.matches(r#"<polygon class="ideal""#).count(), 1);
        let (quads, ideal) = parse_chart(&svg).unwrap();
        let ideal = ideal.unwrap();
        for (a, b) in quads[0].vertices.iter().zip(ideal.vertices.iter()) {
            assert!((a.x - b.x).abs() < 1e-6 && (a.y - b.y).abs() < 1e-6);
        }
    }

    #[test]
    fn parse_back_recovers_geometry() {
        let s = StabilityVector::from_array([0.91, 0.42, 0.77, 0.05]);
        let q = quadrangle("a&b <x>", 0.6, s, 2.0, DEFAULT_HALF_WIDTH).unwrap();
        let svg = render_svg(std::slice::from_ref(&q), &cfg(2.0)).unwrap();
        let (quads, _) = parse_chart(&svg).unwrap();
        assert_eq!(quads[0].detector_id, "a&b <x>");
        assert!((quads[0].cx - 1.2).abs() < 1e-6);
        for (h, e) in quads[0].heights.iter().zip(s.to_array()) {
            assert!((h - e).abs() < 1e-6);
        }
    }

    #[test]
    fn equal_accuracy_shares_centre() {
        let a = quadrangle("a", 0.5, StabilityVector::from_array([0.9, 0.8, 0.7, 0.6]), 3.0, 0.1).unwrap();
        let b = quadrangle("b", 0.5, StabilityVector::from_array([0.6, 0.7, 0.8, 0.9]), 3.0, 0.1).unwrap();
        let svg = render_svg(&[a, b], &cfg(3.0)).unwrap();
        let (quads, _) = parse_chart(&svg).unwrap();
        assert!((quads[0].cx - quads[1].cx).abs() < 1e-9);
        assert!(svg.contains(&stroke(0)) && svg.contains(&stroke(1)) && stroke(0) != stroke(1));
    }

    #[test]
    fn rendering_is_deterministic_and_validated() {
        let q = quadrangle("d", 0.3, StabilityVector::ideal(), 0.0, 0.1).unwrap();
        let a = render_svg(std::slice::from_ref(&q), &cfg(0.0)).unwrap();
        let b = render_svg(std::slice::from_ref(&q), &cfg(0.0)).unwrap();
        assert_eq!(a, b);
        assert!(render_svg(&[], &cfg(0.0)).is_err());
        let bad = ChartConfig { y_range: (0.0, 1.0), ..cfg(0.0) };
        assert!(render_svg(&[q], &bad).is_err());
    }

    #[test]
    fn distinct_colours_beyond_palette() {
        let colours: std::collections::BTreeSet<_> = (0..20).map(stroke).collect();
        assert_eq!(colours.len(), 20);
    }

    proptest! {
        #[test]
        fn round_trip(a_ref in 0.0f64..=1.0, lambda in 0.0f64..20.0, s in proptest::array::uniform4(0.0f64..=1.0)) {
            let q = quadrangle("p", a_ref, StabilityVector::from_array(s), lambda, DEFAULT_HALF_WIDTH).unwrap();
            let svg = render_svg(&[q], &cfg(lambda)).unwrap();
            let (quads, _) = parse_chart(&svg).unwrap();
            prop_assert!((quads[0].cx - lambda * a_ref).abs() < 1e-6);
            for (h, e) in quads[0].heights.iter().zip(s) {
                prop_assert!((h - e).abs() < 1e-6);
            }
        }
    }
}
