use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::hog::{hog_window, BlockGrid, Plane, BLOCK_LEN, CELL};
use super::scene::{render_scene, SceneConfig};
use crate::eval::{iou, BoundingBox, Detection, GroundTruthFrame, MATCH_IOU};
use crate::media::Image;
use crate::{round_half_away, Error, Result};

pub const DEFAULT_DETECTOR_ID: &str = "hog-template";

/// Seed offset separating the training scene from the scene being evaluated.
const TRAINING_SEED_SALT: u64 = 0x7a11_5eed;

/// Sliding-window template detector over a HOG pyramid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorModel {
    pub detector_id: String,
    /// Window size in pixels, including the context margin.
    pub window_w: usize,
    pub window_h: usize,
    /// Context around the object on every side of the window; the reported
    /// box is the window shrunk by this many pixels.
    pub margin: usize,
    /// Ratio between consecutive pyramid levels.
    pub scale_factor: f64,
    /// Number of pyramid levels above the input resolution.
    pub upscale_levels: u32,
    /// Window step in pixels of the current pyramid level; a multiple of the cell size.
    pub stride: usize,
    pub score_threshold: f64,
    pub nms_iou: f64,
    /// Zero-mean, unit-length descriptors. A window scores its best
    /// correlation with any template.
    pub templates: Vec<Vec<f64>>,
}

impl DetectorModel {
    /// Untrained model with the default geometry.
    pub fn untrained() -> Self {
        DetectorModel {
            detector_id: DEFAULT_DETECTOR_ID.into(),
            window_w: 48,
            window_h: 80,
            margin: CELL,
            scale_factor: 2f64.powf(1.0 / 8.0),
            upscale_levels: 4,
            stride: CELL,
            score_threshold: 0.4,
            nms_iou: MATCH_IOU,
            templates: Vec::new(),
        }
    }

    fn blocks(&self) -> (usize, usize) {
        (self.window_w / CELL - 1, self.window_h / CELL - 1)
    }

    pub fn descriptor_len(&self) -> usize {
        let (bx, by) = self.blocks();
        bx * by * BLOCK_LEN
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParam(m));
        if !self.window_w.is_multiple_of(CELL) || !self.window_h.is_multiple_of(CELL) || self.window_w < 2 * CELL || self.window_h < 2 * CELL {
            return bad(format!("window {}x{} must be multiples of {CELL}, two cells or more", self.window_w, self.window_h));
        }
        if 2 * self.margin >= self.window_w.min(self.window_h) {
            return bad(format!("margin {} leaves no object inside the window", self.margin));
        }
        if !(self.scale_factor > 1.0 && self.scale_factor.is_finite()) {
            return bad(format!("scale factor {} must exceed 1", self.scale_factor));
        }
        if self.stride == 0 || !self.stride.is_multiple_of(CELL) {
            return bad(format!("stride {} must be a positive multiple of {CELL}", self.stride));
        }
        if !(0.0..=1.0).contains(&self.nms_iou) {
            return bad(format!("nms_iou {} outside [0, 1]", self.nms_iou));
        }
        if !self.score_threshold.is_finite() {
            return bad("score threshold must be finite".into());
        }
        if self.templates.is_empty() {
            return bad("model has no templates".into());
        }
        let n = self.descriptor_len();
        if self.templates.iter().any(|t| t.len() != n) {
            return bad(format!("templates must have {n} components"));
        }
        Ok(())
    }

    /// Learn one template as the centred, normalised mean of exemplar
    /// descriptors cropped from ground-truth boxes. Each box contributes at
    /// its exact size and at half a pyramid step larger and smaller, matching
    /// the size error objects have at the nearest pyramid level.
    pub fn train(mut self, frames: &[Image], gts: &[GroundTruthFrame]) -> Result<Self> {
        let mut sum = vec![0.0; self.descriptor_len()];
        let mut count = 0usize;
        for g in gts {
            let img = frames
                .get(g.frame_id as usize)
                .ok_or_else(|| Error::Data(format!("ground truth for missing frame {}", g.frame_id)))?;
            let luma = luma_plane(img);
            for b in &g.boxes {
                for jitter in [self.scale_factor.sqrt().recip(), 1.0, self.scale_factor.sqrt()] {
                    if let Some(d) = self.exemplar(&luma, b, jitter) {
                        sum.iter_mut().zip(d).for_each(|(s, v)| *s += v);
                        count += 1;
                    }
                }
            }
        }
        if count == 0 {
            return Err(Error::Empty("no usable exemplars".into()));
        }
        self.templates = vec![center(sum).ok_or_else(|| Error::Data("exemplars carry no gradient energy".into()))?];
        self.validate()?;
        Ok(self)
    }

    /// Descriptor of `b` after rescaling the frame so the box fills the
    /// window's object area, enlarged by `jitter`, with the window centred on the box.
    fn exemplar(&self, luma: &Plane, b: &BoundingBox, jitter: f64) -> Option<Vec<f64>> {
        let f = (self.window_h - 2 * self.margin) as f64 / b.h * jitter;
        let w = round_half_away(luma.width as f64 * f) as usize;
        let h = round_half_away(luma.height as f64 * f) as usize;
        let (sx, sy) = (w as f64 / luma.width as f64, h as f64 / luma.height as f64);
        let x = round_half_away((b.x + b.w / 2.0) * sx - self.window_w as f64 / 2.0);
        let y = round_half_away((b.y + b.h / 2.0) * sy - self.window_h as f64 / 2.0);
        if x < 0.0 || y < 0.0 {
            return None;
        }
        let scaled = luma.resize(w, h);
        hog_window(&scaled, x as usize, y as usize, self.window_w, self.window_h)
            .ok()
            .map(|d| d.vector)
    }

    /// Model trained on a scene like `cfg` but with an unrelated texture seed.
    pub fn train_on_synthetic(cfg: &SceneConfig) -> Result<Self> {
        let train_cfg = SceneConfig {
            texture_seed: cfg.texture_seed ^ TRAINING_SEED_SALT,
            ..cfg.clone()
        };
        let (frames, gts) = render_scene(&train_cfg)?;
        let mut model = DetectorModel::untrained();
        // keep the object aspect ratio of the scene inside the fixed-height window
        let inner_h = (model.window_h - 2 * model.margin) as f64;
        let inner_w = inner_h * cfg.actor_width as f64 / cfg.actor_height as f64;
        let cells = round_half_away((inner_w + 2.0 * model.margin as f64) / CELL as f64) as usize;
        model.window_w = cells.max(2) * CELL;
        model.train(&frames, &gts)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let model: DetectorModel = serde_json::from_str(&text)?;
        model.validate()?;
        Ok(model)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    fn score(&self, grid: &BlockGrid, bx: usize, by: usize) -> f64 {
        let (wbx, wby) = self.blocks();
        let mut sum = 0.0;
        let mut norm2 = 0.0;
        let mut dots = vec![0.0; self.templates.len()];
        let mut off = 0;
        for y in by..by + wby {
            for x in bx..bx + wbx {
                let blk = grid.block(x, y);
                sum += blk.iter().sum::<f64>();
                norm2 += blk.iter().map(|v| v * v).sum::<f64>();
                for (d, t) in dots.iter_mut().zip(&self.templates) {
                    *d += blk.iter().zip(&t[off..off + BLOCK_LEN]).map(|(a, b)| a * b).sum::<f64>();
                }
                off += BLOCK_LEN;
            }
        }
        // templates sum to zero, so centring the window only changes its norm
        let n = (wbx * wby * BLOCK_LEN) as f64;
        let var = norm2 - sum * sum / n;
        if var < 1e-12 {
            return 0.0;
        }
        dots.into_iter().fold(f64::NEG_INFINITY, f64::max) / var.sqrt()
    }

    /// All scored windows of one frame before thresholding and suppression,
    /// as `(box, score)` in frame coordinates.
    pub fn score_windows(&self, img: &Image) -> Result<Vec<(BoundingBox, f64)>> {
        self.validate()?;
        let (w, h) = (img.width(), img.height());
        if w < self.window_w || h < self.window_h {
            return Err(Error::FrameTooSmall { width: w, height: h, win_w: self.window_w, win_h: self.window_h });
        }
        let luma = luma_plane(img);
        let (wbx, wby) = self.blocks();
        let step = self.stride / CELL;
        let mut out = Vec::new();
        let mut level = -(self.upscale_levels as i32);
        loop {
            let f = self.scale_factor.powi(-level);
            let lw = round_half_away(w as f64 * f) as usize;
            let lh = round_half_away(h as f64 * f) as usize;
            if lw < self.window_w || lh < self.window_h {
                break;
            }
            let plane = luma.resize(lw, lh);
            let grid = BlockGrid::of_plane(&plane);
            let (sx, sy) = (w as f64 / lw as f64, h as f64 / lh as f64);
            for by in (0..=grid.blocks_y - wby).step_by(step) {
                for bx in (0..=grid.blocks_x - wbx).step_by(step) {
                    let s = self.score(&grid, bx, by);
                    let m = self.margin;
                    let bbox = BoundingBox {
                        x: (bx * CELL + m) as f64 * sx,
                        y: (by * CELL + m) as f64 * sy,
                        w: (self.window_w - 2 * m) as f64 * sx,
                        h: (self.window_h - 2 * m) as f64 * sy,
                    };
                    out.push((clip_box(bbox, w as f64, h as f64), s));
                }
            }
            level += 1;
        }
        Ok(out)
    }

    /// Detections of one frame after thresholding and non-maximum suppression.
    pub fn detect_frame(&self, img: &Image, frame_id: u32) -> Result<Vec<Detection>> {
        let candidates: Vec<Detection> = self
            .score_windows(img)?
            .into_iter()
            .filter(|(_, s)| *s >= self.score_threshold)
            .map(|(bbox, score)| Detection { frame_id, bbox, score })
            .collect();
        Ok(nms(candidates, self.nms_iou))
    }

    /// Detect on a sequence; frame ids are positions in `frames`.
    pub fn detect(&self, frames: &[Image]) -> Result<Vec<Detection>> {
        let mut out = Vec::new();
        for (i, f) in frames.iter().enumerate() {
            out.extend(self.detect_frame(f, i as u32)?);
        }
        Ok(out)
    }
}

/// Subtract the mean and scale to unit length; `None` for constant vectors.
fn center(mut v: Vec<f64>) -> Option<Vec<f64>> {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= mean);
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm < 1e-12 {
        return None;
    }
    v.iter_mut().for_each(|x| *x /= norm);
    Some(v)
}

pub(crate) fn luma_plane(img: &Image) -> Plane {
    Plane::new(img.width(), img.height(), img.luma())
}

fn clip_box(b: BoundingBox, w: f64, h: f64) -> BoundingBox {
    let x0 = b.x.clamp(0.0, w);
    let y0 = b.y.clamp(0.0, h);
    let x1 = b.right().clamp(0.0, w);
    let y1 = b.bottom().clamp(0.0, h);
    BoundingBox { x: x0, y: y0, w: x1 - x0, h: y1 - y0 }
}

/// Greedy non-maximum suppression. Candidates are visited by descending
/// score, then ascending x and y, so the result does not depend on input order.
pub fn nms(mut dts: Vec<Detection>, max_iou: f64) -> Vec<Detection> {
    dts.sort_by(|a, b| {
        b.score.total_cmp(&a.score)
            .then_with(|| a.bbox.x.total_cmp(&b.bbox.x))
            .then_with(|| a.bbox.y.total_cmp(&b.bbox.y))
    });
    let mut kept: Vec<Detection> = Vec::new();
    for d in dts {
        if kept.iter().all(|k| k.frame_id != d.frame_id || iou(&k.bbox, &d.bbox) <= max_iou) {
            kept.push(d);
        }
    }
    kept
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::evaluate;
    use proptest::prelude::*;

    fn scene() -> SceneConfig {
        SceneConfig { frames: 8, ..SceneConfig::default() }
    }

    fn trained() -> DetectorModel {
        DetectorModel::train_on_synthetic(&scene()).unwrap()
    }

    fn det(x: f64, y: f64, score: f64) -> Detection {
        Detection { frame_id: 0, bbox: BoundingBox { x, y, w: 10.0, h: 20.0 }, score }
    }

    #[test]
    fn nms_keeps_higher_score() {
        let out = nms(vec![det(0.0, 0.0, 0.6), det(1.0, 0.0, 0.9), det(50.0, 0.0, 0.1)], 0.5);
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].score, 0.9);
        assert_eq!(out[1].bbox.x, 50.0);
    }

    #[test]
    fn nms_ignores_other_frames() {
        let mut b = det(0.0, 0.0, 0.5);
        b.frame_id = 1;
        assert_eq!(nms(vec![det(0.0, 0.0, 0.9), b], 0.5).len(), 2);
    }

    #[test]
    fn model_file_round_trip() {
        let m = trained();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("model.json");
        m.write(&p).unwrap();
        assert_eq!(DetectorModel::read(&p).unwrap(), m);
        fs::write(&p, "{\"window_w\": 3}").unwrap();
        assert!(DetectorModel::read(&p).is_err());
    }

    #[test]
    fn small_frames_are_rejected() {
        let m = trained();
        let img = Image::filled(m.window_w - 1, 100, 1, 9).unwrap();
        assert!(matches!(m.detect_frame(&img, 0), Err(Error::FrameTooSmall { .. })));
    }

    #[test]
    fn boxes_stay_in_frame_and_respect_nms() {
        let m = DetectorModel { score_threshold: 0.0, ..trained() };
        let (frames, _) = render_scene(&SceneConfig { width: 100, height: 96, actor_count: 1, actor_height: 40, actor_width: 20, ..scene() }).unwrap();
        let dts = m.detect(&frames[..2]).unwrap();
        assert!(!dts.is_empty());
        for d in &dts {
            assert!(d.bbox.x >= 0.0 && d.bbox.y >= 0.0 && d.bbox.right() <= 100.0 && d.bbox.bottom() <= 96.0);
        }
        for (i, a) in dts.iter().enumerate() {
            for b in &dts[i + 1..] {
                assert!(a.frame_id != b.frame_id || iou(&a.bbox, &b.bbox) <= 0.5);
            }
        }
    }

    #[test]
    fn brightness_shift_leaves_scores_unchanged() {
        let m = trained();
        let (frames, _) = render_scene(&SceneConfig { frames: 1, ..scene() }).unwrap();
        let img = &frames[0];
        let lo = *img.samples().iter().min().unwrap();
        let hi = *img.samples().iter().max().unwrap();
        let base = m.score_windows(img).unwrap();
        for k in [-(lo as i32) + 1, 5, 254 - hi as i32] {
            let shifted = img.map_samples(|v| (v as i32 + k) as u8);
            let s = m.score_windows(&shifted).unwrap();
            assert_eq!(s.len(), base.len());
            for (a, b) in s.iter().zip(&base) {
                assert!((a.1 - b.1).abs() < 1e-9, "offset {k}: {} vs {}", a.1, b.1);
            }
        }
    }

    #[test]
    fn detection_is_deterministic() {
        let m = trained();
        let (frames, _) = render_scene(&scene()).unwrap();
        assert_eq!(m.detect(&frames[..2]).unwrap(), m.detect(&frames[..2]).unwrap());
    }

    #[test]
    fn background_only_scene_has_undefined_accuracy() {
        let m = trained();
        let (frames, gts) = render_scene(&SceneConfig { actor_count: 0, frames: 2, ..scene() }).unwrap();
        let dts = m.detect(&frames).unwrap();
        assert!(matches!(evaluate(&dts, &gts), Err(Error::ZeroGroundTruth)));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn nms_output_is_order_independent(
            raw in proptest::collection::vec((0.0f64..60.0, 0.0f64..60.0, 0.0f64..1.0), 0..20),
            rot in 0usize..20,
        ) {
            let dts: Vec<_> = raw.iter().map(|&(x, y, s)| det(x, y, s)).collect();
            let mut rotated = dts.clone();
            if !rotated.is_empty() {
                let n = rotated.len();
                rotated.rotate_left(rot % n);
            }
            let a = nms(dts, 0.5);
            prop_assert_eq!(&a, &nms(rotated, 0.5));
            for (i, x) in a.iter().enumerate() {
                for y in &a[i + 1..] {
                    prop_assert!(iou(&x.bbox, &y.bbox) <= 0.5);
                }
            }
        }
    }
}
