//! Synthetic surveillance scenes: a static smooth background with textured
//! actors moving linearly and bouncing off the borders of their own
//! horizontal lane, so actors never overlap and ground truth is exact.
//!
//! An actor is a union of upright rectangles shaped like a standing person: a
//! head, a full-width torso and two legs. Its ground-truth box is the tight
//! box around all three parts.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::distortion::frame_name;
use crate::eval::{write_ground_truth, BoundingBox, GroundTruthFrame};
use crate::media::{save_frame, Image, PnmFormat, SequenceManifest};
use crate::{quantize_u8, round_half_away, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BackgroundConfig {
    /// Spacing of the value-noise lattice in pixels.
    pub cell: usize,
    pub mean: f64,
    pub amplitude: f64,
}

impl Default for BackgroundConfig {
    fn default() -> Self {
        BackgroundConfig { cell: 48, mean: 128.0, amplitude: 28.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneConfig {
    pub sequence_id: String,
    pub width: usize,
    pub height: usize,
    pub frames: usize,
    pub channels: usize,
    pub actor_count: usize,
    pub actor_height: usize,
    pub actor_width: usize,
    pub texture_seed: u64,
    /// Range of the distance between an actor's base intensity and mid-gray;
    /// each actor is darker or brighter than 128 by a value drawn from it.
    pub actor_contrast: [f64; 2],
    /// Upper bound on horizontal actor speed, pixels per frame.
    pub max_speed: f64,
    pub background: BackgroundConfig,
}

impl Default for SceneConfig {
    fn default() -> Self {
        SceneConfig {
            sequence_id: "scene".into(),
            width: 320,
            height: 240,
            frames: 60,
            channels: 1,
            actor_count: 3,
            actor_height: 64,
            actor_width: 32,
            texture_seed: 7,
            actor_contrast: [35.0, 70.0],
            max_speed: 2.5,
            background: BackgroundConfig::default(),
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParam(m));
        if self.sequence_id.is_empty() {
            return bad("empty sequence id".into());
        }
        if self.width == 0 || self.height == 0 || self.frames == 0 {
            return bad("scene dimensions and frame count must be positive".into());
        }
        if self.channels != 1 && self.channels != 3 {
            return bad(format!("channels must be 1 or 3, got {}", self.channels));
        }
        if self.actor_height < 16 || self.actor_width == 0 {
            return bad(format!("actors must be at least 16 px tall, got {}", self.actor_height));
        }
        let [c0, c1] = self.actor_contrast;
        if !(0.0 <= c0 && c0 < c1 && c1 <= 128.0) {
            return bad(format!("actor contrast range [{c0}, {c1}] must lie in [0, 128]"));
        }
        if self.background.cell == 0 {
            return bad("background lattice cell must be positive".into());
        }
        if !(self.max_speed.is_finite() && self.max_speed >= 0.0) {
            return bad(format!("max_speed = {} must be ≥ 0", self.max_speed));
        }
        if self.actor_count > 0 {
            let lane = self.height / self.actor_count;
            if lane < self.actor_height || self.width < self.actor_width {
                return bad(format!(
                    "{} actors of {}x{} do not fit in a {}x{} frame",
                    self.actor_count, self.actor_width, self.actor_height, self.width, self.height
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct Actor {
    x0: f64,
    y0: f64,
    vx: f64,
    vy: f64,
    lane_top: f64,
    /// Per-pixel luma offsets in actor-local coordinates.
    texture: Vec<f64>,
    tint: [f64; 3],
}

/// Whether actor-local pixel `(x, y)` of a `w × h` actor belongs to its silhouette.
fn silhouette(x: usize, y: usize, w: usize, h: usize) -> bool {
    let (fx, fy) = ((x as f64 + 0.5) / w as f64, (y as f64 + 0.5) / h as f64);
    if fy < 0.2 {
        (0.3..0.7).contains(&fx)
    } else if fy < 0.6 {
        true
    } else {
        (0.1..0.45).contains(&fx) || (0.55..0.9).contains(&fx)
    }
}

/// Position along `[0, len]` after moving linearly and reflecting at both ends.
fn reflect(p: f64, len: f64) -> f64 {
    if len <= 0.0 {
        return 0.0;
    }
    let q = p.rem_euclid(2.0 * len);
    if q > len { 2.0 * len - q } else { q }
}

fn smoothstep(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

fn background(cfg: &SceneConfig, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let bg = &cfg.background;
    let gw = cfg.width / bg.cell + 2;
    let gh = cfg.height / bg.cell + 2;
    let lattice: Vec<f64> = (0..gw * gh).map(|_| rng.random_range(-1.0..=1.0)).collect();
    let mut out = Vec::with_capacity(cfg.width * cfg.height);
    for y in 0..cfg.height {
        let fy = y as f64 / bg.cell as f64;
        let (iy, ty) = (fy.floor() as usize, smoothstep(fy.fract()));
        for x in 0..cfg.width {
            let fx = x as f64 / bg.cell as f64;
            let (ix, tx) = (fx.floor() as usize, smoothstep(fx.fract()));
            let at = |i: usize, j: usize| lattice[j * gw + i];
            let top = at(ix, iy) * (1.0 - tx) + at(ix + 1, iy) * tx;
            let bot = at(ix, iy + 1) * (1.0 - tx) + at(ix + 1, iy + 1) * tx;
            out.push(bg.mean + bg.amplitude * (top * (1.0 - ty) + bot * ty));
        }
    }
    out
}

fn actors(cfg: &SceneConfig, rng: &mut ChaCha8Rng) -> Vec<Actor> {
    let lane_h = if cfg.actor_count > 0 { cfg.height / cfg.actor_count } else { 0 };
    let (aw, ah) = (cfg.actor_width, cfg.actor_height);
    (0..cfg.actor_count)
        .map(|i| {
            let dark = rng.random_bool(0.5);
            let contrast = rng.random_range(cfg.actor_contrast[0]..cfg.actor_contrast[1]);
            let base = if dark { 128.0 - contrast } else { 128.0 + contrast };
            let period = rng.random_range(6.0..12.0);
            let phase = rng.random_range(0.0..std::f64::consts::TAU);
            let texture = (0..aw * ah)
                .map(|p| {
                    let y = (p / aw) as f64;
                    base - 128.0 + 14.0 * (std::f64::consts::TAU * y / period + phase).sin()
                        + rng.random_range(-8.0..8.0)
                })
                .collect();
            let speed = rng.random_range(0.2..=1.0) * cfg.max_speed;
            let vx = if rng.random_bool(0.5) { speed } else { -speed };
            let vy = rng.random_range(-0.25..=0.25) * cfg.max_speed;
            let tint = [rng.random_range(0.8..1.2), rng.random_range(0.8..1.2), rng.random_range(0.8..1.2)];
            Actor {
                x0: rng.random_range(0.0..=(cfg.width - aw) as f64),
                y0: rng.random_range(0.0..=(lane_h - ah) as f64),
                vx,
                vy,
                lane_top: (i * lane_h) as f64,
                texture,
                tint,
            }
        })
        .collect()
}

/// Render a scene in memory. Identical configs give identical frames.
pub fn render_scene(cfg: &SceneConfig) -> Result<(Vec<Image>, Vec<GroundTruthFrame>)> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.texture_seed);
    let bg = background(cfg, &mut rng);
    let actors = actors(cfg, &mut rng);
    let lane_h = if cfg.actor_count > 0 { cfg.height / cfg.actor_count } else { 0 };
    let (w, h, c) = (cfg.width, cfg.height, cfg.channels);
    let (aw, ah) = (cfg.actor_width, cfg.actor_height);
    let x_len = (w - aw) as f64;
    let y_len = lane_h.saturating_sub(ah) as f64;

    let mut frames = Vec::with_capacity(cfg.frames);
    let mut gts = Vec::with_capacity(cfg.frames);
    for t in 0..cfg.frames {
        // layers: background luma plus, inside actors, their texture offset
        let mut luma = bg.clone();
        let mut tint = vec![[1.0f64; 3]; if c == 3 { w * h } else { 0 }];
        let mut boxes = Vec::with_capacity(actors.len());
        for a in &actors {
            let ax = round_half_away(reflect(a.x0 + a.vx * t as f64, x_len)) as usize;
            let ay = (a.lane_top + round_half_away(reflect(a.y0 + a.vy * t as f64, y_len))) as usize;
            for ly in 0..ah {
                for lx in (0..aw).filter(|&lx| silhouette(lx, ly, aw, ah)) {
                    let idx = (ay + ly) * w + ax + lx;
                    luma[idx] = 128.0 + a.texture[ly * aw + lx];
                    if c == 3 {
                        tint[idx] = a.tint;
                    }
                }
            }
            boxes.push(BoundingBox::new(ax as f64, ay as f64, aw as f64, ah as f64)?);
        }
        let data = if c == 1 {
            luma.iter().map(|&v| quantize_u8(v)).collect()
        } else {
            luma.iter()
                .zip(&tint)
                .flat_map(|(&v, t)| [quantize_u8(v * t[0]), quantize_u8(v * t[1]), quantize_u8(v * t[2])])
                .collect()
        };
        frames.push(Image::new(w, h, c, data)?);
        gts.push(GroundTruthFrame { frame_id: t as u32, boxes });
    }
    Ok((frames, gts))
}

/// Render a scene into `dir` as numbered frames, `gt.csv` and `manifest.json`.
pub fn synth_scene(cfg: &SceneConfig, dir: &Path) -> Result<(SequenceManifest, Vec<GroundTruthFrame>)> {
    let (frames, gts) = render_scene(cfg)?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let fmt = PnmFormat::for_channels(cfg.channels).expect("validated channel count");
    let mut paths = Vec::with_capacity(frames.len());
    for (i, img) in frames.iter().enumerate() {
        let p = dir.join(frame_name(i, fmt));
        save_frame(img, &p, fmt)?;
        paths.push(p);
    }
    let gt_path = dir.join("gt.csv");
    write_ground_truth(&gt_path, &gts)?;
    let mut manifest = SequenceManifest::reference(cfg.sequence_id.clone(), paths);
    manifest.ground_truth = Some(gt_path);
    manifest.seed_policy = Some(format!("texture_seed {}", cfg.texture_seed));
    manifest.write(&dir.join("manifest.json"))?;
    Ok((manifest, gts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::height_stats;

    fn small() -> SceneConfig {
        SceneConfig { width: 96, height: 80, frames: 12, actor_count: 2, actor_height: 32, actor_width: 16, ..SceneConfig::default() }
    }

    #[test]
    fn empty_scene_has_no_boxes() {
        let cfg = SceneConfig { actor_count: 0, ..small() };
        let (frames, gts) = render_scene(&cfg).unwrap();
        assert_eq!(frames.len(), 12);
        assert!(gts.iter().all(|g| g.boxes.is_empty()));
    }

    #[test]
    fn constant_actor_height_means_zero_hvc() {
        let (_, gts) = render_scene(&small()).unwrap();
        let s = height_stats(&gts).unwrap();
        assert_eq!(s.h_vc, 0.0);
        assert_eq!(s.mu_h, 32.0);
    }

    #[test]
    fn actors_stay_inside_and_apart() {
        let cfg = SceneConfig { frames: 200, max_speed: 7.0, ..small() };
        let (_, gts) = render_scene(&cfg).unwrap();
        for g in &gts {
            for (i, b) in g.boxes.iter().enumerate() {
                assert!(b.x >= 0.0 && b.y >= 0.0 && b.right() <= 96.0 && b.bottom() <= 80.0);
                for o in &g.boxes[i + 1..] {
                    assert_eq!(crate::eval::iou(b, o), 0.0);
                }
            }
        }
    }

    #[test]
    fn rendering_is_deterministic() {
        let a = render_scene(&small()).unwrap();
        let b = render_scene(&small()).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
        let other = render_scene(&SceneConfig { texture_seed: 8, ..small() }).unwrap();
        assert_ne!(a.0, other.0);
    }

    #[test]
    fn colour_scenes() {
        let (frames, _) = render_scene(&SceneConfig { channels: 3, ..small() }).unwrap();
        assert_eq!(frames[0].channels(), 3);
    }

    #[test]
    fn rejects_impossible_configs() {
        assert!(render_scene(&SceneConfig { actor_count: 3, ..small() }).is_err());
        assert!(render_scene(&SceneConfig { actor_height: 12, ..small() }).is_err());
        assert!(render_scene(&SceneConfig { actor_width: 200, ..small() }).is_err());
    }

    #[test]
    fn writes_a_readable_sequence() {
        let dir = tempfile::tempdir().unwrap();
        let (m, gts) = synth_scene(&small(), dir.path()).unwrap();
        let back = SequenceManifest::read(&dir.path().join("manifest.json")).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.load_frames().unwrap().len(), 12);
        assert_eq!(crate::eval::read_ground_truth(back.ground_truth.as_ref().unwrap()).unwrap(), gts);
    }

    #[test]
    fn silhouette_spans_its_box() {
        let (w, h) = (32, 64);
        assert!((0..w).any(|x| silhouette(x, 0, w, h)));
        assert!((0..w).any(|x| silhouette(x, h - 1, w, h)));
        assert!((0..h).any(|y| silhouette(0, y, w, h)));
        assert!((0..h).any(|y| silhouette(w - 1, y, w, h)));
        assert!(!silhouette(w / 2, h - 1, w, h));
        assert!(!silhouette(0, 0, w, h));
    }

    #[test]
    fn reflect_bounces() {
        assert_eq!(reflect(3.0, 10.0), 3.0);
        assert_eq!(reflect(12.0, 10.0), 8.0);
        assert_eq!(reflect(-2.0, 10.0), 2.0);
        assert_eq!(reflect(5.0, 0.0), 0.0);
    }
}
