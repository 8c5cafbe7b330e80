//! CSV formats: ground truth `frame_id,x,y,w,h`, detections
//! `frame_id,x,y,w,h,score` and curves `threshold,fppi,miss_rate`.
//!
//! A ground-truth row whose box fields are empty declares a frame without
//! pedestrians, so that frame still counts towards FPPI.

use std::collections::BTreeMap;
use std::path::Path;

use super::{BoundingBox, Detection, GroundTruthFrame, MrFppiCurve};
use crate::serde_util::format_f64;
use crate::{Error, Result};

const GT_HEADER: [&str; 5] = ["frame_id", "x", "y", "w", "h"];
const DET_HEADER: [&str; 6] = ["frame_id", "x", "y", "w", "h", "score"];

fn reader(path: &Path, header: &[&str]) -> Result<csv::Reader<std::fs::File>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rd = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let found: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
    if found != header {
        return Err(Error::Data(format!(
            "{}: expected header {}, found {}",
            path.display(),
            header.join(","),
            found.join(",")
        )));
    }
    Ok(rd)
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, path: &Path) -> Result<T> {
    rec.get(i).and_then(|s| s.parse().ok()).ok_or_else(|| {
        Error::Data(format!(
            "{}:{}: bad value in column {}",
            path.display(),
            rec.position().map_or(0, |p| p.line()),
            i + 1
        ))
    })
}

fn parse_box(rec: &csv::StringRecord, path: &Path) -> Result<BoundingBox> {
    BoundingBox::new(
        field(rec, 1, path)?,
        field(rec, 2, path)?,
        field(rec, 3, path)?,
        field(rec, 4, path)?,
    )
}

/// Read ground truth, grouping rows by frame id (ascending).
pub fn read_ground_truth(path: &Path) -> Result<Vec<GroundTruthFrame>> {
    let mut rd = reader(path, &GT_HEADER)?;
    let mut frames: BTreeMap<u32, Vec<BoundingBox>> = BTreeMap::new();
    for rec in rd.records() {
        let rec = rec?;
        let id: u32 = field(&rec, 0, path)?;
        let boxes = frames.entry(id).or_default();
        if rec.iter().skip(1).all(str::is_empty) {
            continue;
        }
        boxes.push(parse_box(&rec, path)?);
    }
    Ok(frames
        .into_iter()
        .map(|(frame_id, boxes)| GroundTruthFrame { frame_id, boxes })
        .collect())
}

pub fn write_ground_truth(path: &Path, frames: &[GroundTruthFrame]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(GT_HEADER)?;
    for f in frames {
        if f.boxes.is_empty() {
            w.write_record([f.frame_id.to_string().as_str(), "", "", "", ""])?;
        }
        for b in &f.boxes {
            w.write_record([
                f.frame_id.to_string(),
                b.x.to_string(),
                b.y.to_string(),
                b.w.to_string(),
                b.h.to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_detections(path: &Path) -> Result<Vec<Detection>> {
    let mut rd = reader(path, &DET_HEADER)?;
    let mut out = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let score: f64 = field(&rec, 5, path)?;
        if !score.is_finite() {
            return Err(Error::Data(format!("{}: non-finite score", path.display())));
        }
        out.push(Detection {
            frame_id: field(&rec, 0, path)?,
            bbox: parse_box(&rec, path)?,
            score,
        });
    }
    Ok(out)
}

pub fn write_detections(path: &Path, dts: &[Detection]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(DET_HEADER)?;
    for d in dts {
        w.write_record([
            d.frame_id.to_string(),
            d.bbox.x.to_string(),
            d.bbox.y.to_string(),
            d.bbox.w.to_string(),
            d.bbox.h.to_string(),
            d.score.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_curve_csv(path: &Path, curve: &MrFppiCurve) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["threshold", "fppi", "miss_rate"])?;
    for p in &curve.points {
        w.write_record([format_f64(p.threshold), p.fppi.to_string(), p.miss_rate.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    #[test]
    fn ground_truth_round_trip_with_empty_frames() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("gt.csv");
        let frames = vec![
            GroundTruthFrame { frame_id: 0, boxes: vec![] },
            GroundTruthFrame {
                frame_id: 1,
                boxes: vec![
                    BoundingBox::new(1.5, 2.0, 10.0, 20.25).unwrap(),
                    BoundingBox::new(30.0, 2.0, 10.0, 20.0).unwrap(),
                ],
            },
        ];
        write_ground_truth(&p, &frames).unwrap();
        assert_eq!(read_ground_truth(&p).unwrap(), frames);
    }

    #[test]
    fn header_is_required() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("gt.csv");
        fs::write(&p, "0,1,2,3,4\n").unwrap();
        assert!(matches!(read_ground_truth(&p), Err(Error::Data(_))));
    }

    #[test]
    fn detections_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        let d = vec![Detection {
            frame_id: 4,
            bbox: BoundingBox::new(1.0, 2.0, 3.0, 4.0).unwrap(),
            score: 0.125,
        }];
        write_detections(&p, &d).unwrap();
        assert_eq!(read_detections(&p).unwrap(), d);
        fs::write(&p, "frame_id,x,y,w,h,score\n0,1,1,0,1,0.5\n").unwrap();
        assert!(read_detections(&p).is_err());
    }

    #[test]
    fn curve_csv_writes_inf() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.csv");
        let gts = vec![GroundTruthFrame { frame_id: 0, boxes: vec![BoundingBox::new(0.0, 0.0, 1.0, 1.0).unwrap()] }];
        let c = super::super::mr_fppi_curve(&[], &gts).unwrap();
        write_curve_csv(&p, &c).unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "threshold,fppi,miss_rate\ninf,0,1\n");
    }
}
