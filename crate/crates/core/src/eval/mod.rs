//! Detection evaluation: overlap matching, miss-rate/FPPI curves, log-average
//! miss rate, accuracy and ground-truth height statistics.

mod curve;
mod heights;
mod io;

pub use curve::{
    accuracy, evaluate, fppi_sample_points, log_avg_miss_rate, mr_fppi_curve, AccuracyResult, CurvePoint,
    MrFppiCurve,
};
pub use heights::{height_stats, HeightStats};
pub use io::{read_detections, read_ground_truth, write_curve_csv, write_detections, write_ground_truth};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Default overlap threshold; a match needs IoU strictly above it.
pub const MATCH_IOU: f64 = 0.5;

/// Axis-aligned box with top-left corner `(x, y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BoundingBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Result<Self> {
        if !(w > 0.0 && h > 0.0) || !x.is_finite() || !y.is_finite() || !w.is_finite() || !h.is_finite() {
            return Err(Error::Data(format!("invalid box ({x}, {y}, {w}, {h})")));
        }
        Ok(BoundingBox { x, y, w, h })
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn right(&self) -> f64 {
        self.x + self.w
    }

    pub fn bottom(&self) -> f64 {
        self.y + self.h
    }

    pub fn scaled(&self, sx: f64, sy: f64) -> BoundingBox {
        BoundingBox {
            x: self.x * sx,
            y: self.y * sy,
            w: self.w * sx,
            h: self.h * sy,
        }
    }
}

/// Intersection over union; 0 for disjoint boxes.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let iw = a.right().min(b.right()) - a.x.max(b.x);
    let ih = a.bottom().min(b.bottom()) - a.y.max(b.y);
    if iw <= 0.0 || ih <= 0.0 {
        return 0.0;
    }
    let inter = iw * ih;
    (inter / (a.area() + b.area() - inter)).min(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub frame_id: u32,
    #[serde(flatten)]
    pub bbox: BoundingBox,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GroundTruthFrame {
    pub frame_id: u32,
    pub boxes: Vec<BoundingBox>,
}

impl GroundTruthFrame {
    pub fn scaled(&self, sx: f64, sy: f64) -> GroundTruthFrame {
        GroundTruthFrame {
            frame_id: self.frame_id,
            boxes: self.boxes.iter().map(|b| b.scaled(sx, sy)).collect(),
        }
    }
}

/// Outcome of matching one frame.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MatchResult {
    /// For each input detection, the index of the ground truth it matched.
    pub assignment: Vec<Option<usize>>,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

/// Detection indices in processing order: descending score, ties by input order.
pub(crate) fn score_order(dts: &[Detection]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..dts.len()).collect();
    order.sort_by(|&a, &b| dts[b].score.total_cmp(&dts[a].score));
    order
}

/// Greedy one-to-one matching of a frame's detections against its ground truth.
///
/// Detections are visited by descending score; each takes the still-unmatched
/// ground truth with the highest IoU, provided that IoU exceeds `thresh`.
pub fn match_frame(dts: &[Detection], gts: &[BoundingBox], thresh: f64) -> MatchResult {
    let mut taken = vec![false; gts.len()];
    let mut assignment = vec![None; dts.len()];
    let mut tp = 0;
    for di in score_order(dts) {
        let mut best: Option<(usize, f64)> = None;
        for (gi, gt) in gts.iter().enumerate() {
            if taken[gi] {
                continue;
            }
            let o = iou(&dts[di].bbox, gt);
            if o > thresh && best.is_none_or(|(_, b)| o > b) {
                best = Some((gi, o));
            }
        }
        if let Some((gi, _)) = best {
            taken[gi] = true;
            assignment[di] = Some(gi);
            tp += 1;
        }
    }
    MatchResult {
        assignment,
        tp,
        fp: dts.len() - tp,
        fn_: gts.len() - tp,
    }
}
