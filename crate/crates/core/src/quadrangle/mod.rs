//! Robustness quadrangles: one glyph per detector, centred at `λ·A_ref`,
//! whose four corners carry the stability components.
//!
//! Corners run clockwise from the left-upper one: qp, res, wn, bv. The upper
//! pair sits at `+S` and the lower pair at `−S` around the axis `y = 0`, so an
//! ideal detector draws a full rectangle and a detector that is unstable
//! everywhere collapses onto its centre.

mod svg;

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::distortion::DistortionKind;
use crate::stability::StabilityVector;
use crate::{Error, Result};

pub use svg::{parse_chart, render_svg, ParsedQuad};

pub const DEFAULT_HALF_WIDTH: f64 = 0.1;
pub const DEFAULT_LAMBDA: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadrangleSpec {
    pub detector_id: String,
    pub a_ref: f64,
    pub s: StabilityVector,
    pub lambda: f64,
    pub half_width: f64,
}

impl QuadrangleSpec {
    pub fn cx(&self) -> f64 {
        self.lambda * self.a_ref
    }

    /// Corner heights in clockwise order: qp, res, wn, bv.
    pub fn heights(&self) -> [f64; 4] {
        self.s.to_array()
    }

    /// Left-upper, right-upper, right-bottom, left-bottom.
    pub fn vertices(&self) -> [Point; 4] {
        let (cx, hw) = (self.cx(), self.half_width);
        let [qp, res, wn, bv] = self.heights();
        [
            Point { x: cx - hw, y: qp },
            Point { x: cx + hw, y: res },
            Point { x: cx + hw, y: -wn },
            Point { x: cx - hw, y: -bv },
        ]
    }
}

pub fn quadrangle(
    detector_id: &str,
    a_ref: f64,
    s: StabilityVector,
    lambda: f64,
    half_width: f64,
) -> Result<QuadrangleSpec> {
    if detector_id.is_empty() {
        return Err(Error::InvalidParam("empty detector id".into()));
    }
    if !(0.0..=1.0).contains(&a_ref) {
        return Err(Error::InvalidParam(format!("a_ref = {a_ref} outside [0, 1]")));
    }
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::InvalidParam(format!("lambda = {lambda} must be finite and ≥ 0")));
    }
    if !(half_width.is_finite() && half_width > 0.0) {
        return Err(Error::InvalidParam(format!("half width = {half_width} must be > 0")));
    }
    s.validate()?;
    Ok(QuadrangleSpec {
        detector_id: detector_id.to_string(),
        a_ref,
        s,
        lambda,
        half_width,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChartConfig {
    pub lambda: f64,
    pub show_ideal: bool,
    /// Horizontal bounds in chart units; derived from the glyphs when unset.
    pub x_range: Option<(f64, f64)>,
    pub y_range: (f64, f64),
    pub title: String,
    pub x_label: String,
    pub y_label: String,
}

impl Default for ChartConfig {
    fn default() -> Self {
        ChartConfig {
            lambda: DEFAULT_LAMBDA,
            show_ideal: true,
            x_range: None,
            y_range: (-1.1, 1.1),
            title: "Robustness quadrangles".into(),
            x_label: "λ · A_ref".into(),
            y_label: "stability (upper: qp | res, lower: bv | wn)".into(),
        }
    }
}

impl ChartConfig {
    pub fn validate(&self) -> Result<()> {
        let (y0, y1) = self.y_range;
        if !(y0 <= -1.0 && y1 >= 1.0) {
            return Err(Error::InvalidParam("y range must cover [-1, 1]".into()));
        }
        if let Some((x0, x1)) = self.x_range {
            if !(x0.is_finite() && x1.is_finite() && x0 < x1) {
                return Err(Error::InvalidParam(format!("bad x range [{x0}, {x1}]")));
            }
        }
        Ok(())
    }
}

/// Render the chart and write it to `path`.
pub fn render_chart(quads: &[QuadrangleSpec], cfg: &ChartConfig, path: &Path) -> Result<()> {
    let svg = render_svg(quads, cfg)?;
    fs::write(path, svg).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingRow {
    pub kind: DistortionKind,
    pub rank: usize,
    pub detector_id: String,
    pub s_value: f64,
}

/// Per-kind rankings by descending stability. Equal values are ordered by
/// detector id and still receive consecutive ranks.
pub fn rank_by_stability(results: &[(String, StabilityVector)]) -> Result<Vec<RankingRow>> {
    if results.is_empty() {
        return Err(Error::Empty("nothing to rank".into()));
    }
    let mut ids: Vec<&str> = results.iter().map(|(id, _)| id.as_str()).collect();
    ids.sort_unstable();
    if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::InvalidParam(format!("duplicate detector id {:?}", w[0])));
    }
    let mut rows = Vec::with_capacity(results.len() * 4);
    for kind in DistortionKind::ALL {
        let mut sorted: Vec<(&str, f64)> = results.iter().map(|(id, s)| (id.as_str(), s.get(kind))).collect();
        sorted.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        rows.extend(sorted.into_iter().enumerate().map(|(i, (id, v))| RankingRow {
            kind,
            rank: i + 1,
            detector_id: id.to_string(),
            s_value: v,
        }));
    }
    Ok(rows)
}

pub fn write_ranking_csv(rows: &[RankingRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Data(format!("{other:?}")),
    })?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sv(v: [f64; 4]) -> StabilityVector {
        StabilityVector::from_array(v)
    }

    #[test]
    fn centre_is_lambda_times_accuracy() {
        let q = quadrangle("d", 1.0, StabilityVector::ideal(), 5.0, DEFAULT_HALF_WIDTH).unwrap();
        assert_eq!(q.cx(), 5.0);
        assert_eq!(q.heights(), [1.0; 4]);
        let q = quadrangle("d", 0.6, sv([0.9, 0.8, 0.7, 0.6]), 2.0, DEFAULT_HALF_WIDTH).unwrap();
        assert!((q.cx() - 1.2).abs() < 1e-15);
        let q = quadrangle("d", 0.37, sv([0.9, 0.8, 0.7, 0.6]), 0.0, DEFAULT_HALF_WIDTH).unwrap();
        assert_eq!(q.cx(), 0.0);
    }

    #[test]
    fn vertices_run_clockwise() {
        let q = quadrangle("d", 0.5, sv([0.9, 0.8, 0.7, 0.6]), 2.0, 0.1).unwrap();
        let v = q.vertices();
        assert!(v[0].x < v[1].x && v[1].x == v[2].x && v[3].x == v[0].x);
        assert_eq!([v[0].y, v[1].y, v[2].y, v[3].y], [0.9, 0.8, -0.7, -0.6]);
    }

    #[test]
    fn invalid_inputs() {
        let s = StabilityVector::ideal();
        assert!(quadrangle("d", 1.2, s, 1.0, 0.1).is_err());
        assert!(quadrangle("d", 0.5, s, -1.0, 0.1).is_err());
        assert!(quadrangle("d", 0.5, s, 1.0, 0.0).is_err());
        assert!(quadrangle("", 0.5, s, 1.0, 0.1).is_err());
        assert!(quadrangle("d", 0.5, sv([1.0, 1.0, 1.0, 1.5]), 1.0, 0.1).is_err());
    }

    #[test]
    fn ranking_sorts_and_breaks_ties_by_id() {
        let rows = rank_by_stability(&[
            ("B".into(), sv([0.7, 0.5, 0.5, 0.2])),
            ("A".into(), sv([0.9, 0.5, 0.4, 0.3])),
        ])
        .unwrap();
        let of = |k: DistortionKind| -> Vec<(usize, String)> {
            rows.iter().filter(|r| r.kind == k).map(|r| (r.rank, r.detector_id.clone())).collect()
        };
        assert_eq!(of(DistortionKind::Qp), vec![(1, "A".into()), (2, "B".into())]);
        assert_eq!(of(DistortionKind::Res), vec![(1, "A".into()), (2, "B".into())]);
        assert_eq!(of(DistortionKind::Wn), vec![(1, "B".into()), (2, "A".into())]);
        assert_eq!(of(DistortionKind::Bv), vec![(1, "A".into()), (2, "B".into())]);
    }

    #[test]
    fn ranking_single_and_errors() {
        let rows = rank_by_stability(&[("x".into(), sv([0.1, 0.2, 0.3, 0.4]))]).unwrap();
        assert_eq!(rows.len(), 4);
        assert!(rows.iter().all(|r| r.rank == 1));
        assert!(rank_by_stability(&[]).is_err());
        let s = StabilityVector::ideal();
        assert!(rank_by_stability(&[("x".into(), s), ("x".into(), s)]).is_err());
    }

    #[test]
    fn ranking_csv_layout() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rank.csv");
        let rows = rank_by_stability(&[("x".into(), sv([0.1, 0.2, 0.3, 0.4]))]).unwrap();
        write_ranking_csv(&rows, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(
            text,
            "kind,rank,detector_id,s_value\nqp,1,x,0.1\nres,1,x,0.2\nwn,1,x,0.3\nbv,1,x,0.4\n"
        );
    }
}
