use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{match_frame, Detection, GroundTruthFrame, MATCH_IOU};
use crate::{Error, Result};

/// One operating point of the threshold sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    /// Detections with `score >= threshold` are kept; `+∞` keeps none.
    #[serde(with = "crate::serde_util::f64_or_inf")]
    pub threshold: f64,
    pub fppi: f64,
    pub miss_rate: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

/// Miss rate against false positives per image, ordered by descending threshold.
/// The first point is always `(fppi 0, miss rate 1)` at threshold `+∞`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MrFppiCurve {
    pub points: Vec<CurvePoint>,
}

/// Sweep the detection threshold over every distinct score.
///
/// The frame set is the union of ground-truth and detection frame ids. With
/// score-ordered greedy matching, the matches at threshold `t` are exactly the
/// first matches of the full run, so each frame is matched once and counts are
/// accumulated along the sweep.
pub fn mr_fppi_curve(dts: &[Detection], gts: &[GroundTruthFrame]) -> Result<MrFppiCurve> {
    let mut frames: BTreeMap<u32, (Vec<Detection>, &[super::BoundingBox])> = BTreeMap::new();
    for g in gts {
        if frames.insert(g.frame_id, (Vec::new(), &g.boxes)).is_some() {
            return Err(Error::Data(format!("ground truth frame {} listed twice", g.frame_id)));
        }
    }
    for d in dts {
        if !d.score.is_finite() {
            return Err(Error::Data(format!("non-finite score in frame {}", d.frame_id)));
        }
        frames.entry(d.frame_id).or_default().0.push(*d);
    }
    let total_gt: usize = gts.iter().map(|g| g.boxes.len()).sum();
    if total_gt == 0 {
        return Err(Error::ZeroGroundTruth);
    }
    let n_frames = frames.len() as f64;

    // (score, is_tp) for every detection
    let mut outcomes: Vec<(f64, bool)> = Vec::with_capacity(dts.len());
    for (dets, boxes) in frames.values() {
        let m = match_frame(dets, boxes, MATCH_IOU);
        outcomes.extend(dets.iter().zip(&m.assignment).map(|(d, a)| (d.score, a.is_some())));
    }
    outcomes.sort_by(|a, b| b.0.total_cmp(&a.0));

    let mut points = vec![CurvePoint {
        threshold: f64::INFINITY,
        fppi: 0.0,
        miss_rate: 1.0,
        tp: 0,
        fp: 0,
        fn_: total_gt,
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < outcomes.len() {
        let t = outcomes[i].0;
        while i < outcomes.len() && outcomes[i].0 == t {
            if outcomes[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(CurvePoint {
            threshold: t,
            fppi: fp as f64 / n_frames,
            miss_rate: (total_gt - tp) as f64 / total_gt as f64,
            tp,
            fp,
            fn_: total_gt - tp,
        });
    }
    Ok(MrFppiCurve { points })
}

/// The nine reference FPPI values `10^(−2 + k/4)`, k = 0..8.
pub fn fppi_sample_points() -> [f64; 9] {
    std::array::from_fn(|k| 10f64.powf(-2.0 + k as f64 / 4.0))
}

/// Arithmetic mean of the miss rate sampled at the nine reference FPPI values.
///
/// Each sample reads the last point along the sweep whose FPPI does not exceed
/// the reference value (step interpolation).
pub fn log_avg_miss_rate(curve: &MrFppiCurve) -> f64 {
    let samples = fppi_sample_points().map(|f| {
        curve
            .points
            .iter()
            .take_while(|p| p.fppi <= f)
            .last()
            .map_or(1.0, |p| p.miss_rate)
    });
    samples.iter().sum::<f64>() / samples.len() as f64
}

/// `A = 1 − MR`.
pub fn accuracy(mr: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&mr) {
        return Err(Error::InvalidParam(format!("miss rate {mr} outside [0, 1]")));
    }
    Ok(1.0 - mr)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyResult {
    /// Log-average miss rate.
    pub mr: f64,
    pub accuracy: f64,
    pub curve: MrFppiCurve,
}

/// Full chain: curve, log-average miss rate and accuracy.
pub fn evaluate(dts: &[Detection], gts: &[GroundTruthFrame]) -> Result<AccuracyResult> {
    let curve = mr_fppi_curve(dts, gts)?;
    let mr = log_avg_miss_rate(&curve);
    Ok(AccuracyResult {
        mr,
        accuracy: accuracy(mr)?,
        curve,
    })
}
