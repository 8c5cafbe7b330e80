//! Histogram-of-oriented-gradients features on the luma plane.
//!
//! 8×8-pixel cells with 9 unsigned orientation bins centred at 10°, 30°, …,
//! 170°; each pixel votes its gradient magnitude into the two nearest bins.
//! Blocks of 2×2 cells (stride one cell) are L2-normalised, clipped at 0.2
//! and renormalised.

use crate::{Error, Result};

pub const CELL: usize = 8;
pub const BINS: usize = 9;
pub const BLOCK_LEN: usize = 4 * BINS;
pub const CLIP: f64 = 0.2;

const BIN_WIDTH: f64 = 180.0 / BINS as f64;
/// Squared norms below this are treated as zero when normalising.
const NORM_FLOOR: f64 = 1e-12;

/// A single-channel plane of real samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl Plane {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), width * height, "plane size mismatch");
        Plane { width, height, data }
    }

    #[inline]
    fn at(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    /// Bilinear resampling to `width × height` with pixel centres aligned.
    pub fn resize(&self, width: usize, height: usize) -> Plane {
        if width == self.width && height == self.height {
            return self.clone();
        }
        let sx = self.width as f64 / width as f64;
        let sy = self.height as f64 / height as f64;
        let taps = |dst: usize, scale: f64, len: usize| {
            let src = ((dst as f64 + 0.5) * scale - 0.5).clamp(0.0, (len - 1) as f64);
            let i0 = src.floor() as usize;
            let i1 = (i0 + 1).min(len - 1);
            (i0, i1, src - i0 as f64)
        };
        let cols: Vec<_> = (0..width).map(|x| taps(x, sx, self.width)).collect();
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            let (y0, y1, fy) = taps(y, sy, self.height);
            for &(x0, x1, fx) in &cols {
                let top = self.at(x0, y0) * (1.0 - fx) + self.at(x1, y0) * fx;
                let bot = self.at(x0, y1) * (1.0 - fx) + self.at(x1, y1) * fx;
                data.push(top * (1.0 - fy) + bot * fy);
            }
        }
        Plane { width, height, data }
    }
}

/// Cell histograms over the region `[x0, x0 + 8·cells_x) × [y0, y0 + 8·cells_y)`.
/// Gradients are centred differences; samples outside the plane replicate the border.
pub fn cell_histograms(p: &Plane, x0: usize, y0: usize, cells_x: usize, cells_y: usize) -> Vec<[f64; BINS]> {
    let (w, h) = (p.width, p.height);
    let mut hist = vec![[0.0; BINS]; cells_x * cells_y];
    for cy in 0..cells_y {
        for py in 0..CELL {
            let y = y0 + cy * CELL + py;
            let (yu, yd) = (y.saturating_sub(1), (y + 1).min(h - 1));
            for cx in 0..cells_x {
                let cell = &mut hist[cy * cells_x + cx];
                for px in 0..CELL {
                    let x = x0 + cx * CELL + px;
                    let (xl, xr) = (x.saturating_sub(1), (x + 1).min(w - 1));
                    let gx = p.at(xr, y) - p.at(xl, y);
                    let gy = p.at(x, yd) - p.at(x, yu);
                    let mag = (gx * gx + gy * gy).sqrt();
                    if mag == 0.0 {
                        continue;
                    }
                    let mut theta = gy.atan2(gx).to_degrees();
                    if theta < 0.0 {
                        theta += 180.0;
                    }
                    if theta >= 180.0 {
                        theta -= 180.0;
                    }
                    let pos = theta / BIN_WIDTH - 0.5;
                    let lo = pos.floor();
                    let frac = pos - lo;
                    let b0 = (lo as i64).rem_euclid(BINS as i64) as usize;
                    let b1 = (b0 + 1) % BINS;
                    cell[b0] += mag * (1.0 - frac);
                    cell[b1] += mag * frac;
                }
            }
        }
    }
    hist
}

fn normalize(v: &mut [f64; BLOCK_LEN]) {
    let rescale = |v: &mut [f64; BLOCK_LEN]| {
        let n2: f64 = v.iter().map(|x| x * x).sum();
        if n2 < NORM_FLOOR {
            v.fill(0.0);
        } else {
            let inv = 1.0 / n2.sqrt();
            v.iter_mut().for_each(|x| *x *= inv);
        }
    };
    rescale(v);
    v.iter_mut().for_each(|x| *x = x.min(CLIP));
    rescale(v);
}

/// Normalised 2×2 block features over a grid of cell histograms.
#[derive(Debug, Clone)]
pub struct BlockGrid {
    pub blocks_x: usize,
    pub blocks_y: usize,
    pub feats: Vec<[f64; BLOCK_LEN]>,
}

impl BlockGrid {
    pub fn from_cells(hist: &[[f64; BINS]], cells_x: usize, cells_y: usize) -> Self {
        let blocks_x = cells_x.saturating_sub(1);
        let blocks_y = cells_y.saturating_sub(1);
        let mut feats = Vec::with_capacity(blocks_x * blocks_y);
        for by in 0..blocks_y {
            for bx in 0..blocks_x {
                let mut v = [0.0; BLOCK_LEN];
                for (k, (dx, dy)) in [(0, 0), (1, 0), (0, 1), (1, 1)].into_iter().enumerate() {
                    v[k * BINS..(k + 1) * BINS].copy_from_slice(&hist[(by + dy) * cells_x + bx + dx]);
                }
                normalize(&mut v);
                feats.push(v);
            }
        }
        BlockGrid { blocks_x, blocks_y, feats }
    }

    /// Block grid of a whole plane, cells anchored at the top-left corner.
    pub fn of_plane(p: &Plane) -> Self {
        let (cx, cy) = (p.width / CELL, p.height / CELL);
        BlockGrid::from_cells(&cell_histograms(p, 0, 0, cx, cy), cx, cy)
    }

    #[inline]
    pub fn block(&self, bx: usize, by: usize) -> &[f64; BLOCK_LEN] {
        &self.feats[by * self.blocks_x + bx]
    }

    /// Descriptor of the window whose top-left block is `(bx, by)`.
    pub fn window(&self, bx: usize, by: usize, wbx: usize, wby: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(wbx * wby * BLOCK_LEN);
        for y in by..by + wby {
            for x in bx..bx + wbx {
                out.extend_from_slice(self.block(x, y));
            }
        }
        out
    }
}

/// HOG descriptor of one detection window.
#[derive(Debug, Clone, PartialEq)]
pub struct HogDescriptor {
    pub blocks_x: usize,
    pub blocks_y: usize,
    pub vector: Vec<f64>,
}

/// Descriptor of the `win_w × win_h` window with top-left pixel `(x, y)`.
pub fn hog_window(p: &Plane, x: usize, y: usize, win_w: usize, win_h: usize) -> Result<HogDescriptor> {
    if !win_w.is_multiple_of(CELL) || !win_h.is_multiple_of(CELL) || win_w < 2 * CELL || win_h < 2 * CELL {
        return Err(Error::InvalidParam(format!(
            "window {win_w}x{win_h} must be a multiple of {CELL} and at least two cells"
        )));
    }
    if x + win_w > p.width || y + win_h > p.height {
        return Err(Error::InvalidParam(format!(
            "window {win_w}x{win_h} at ({x}, {y}) exceeds {}x{} image",
            p.width, p.height
        )));
    }
    let (cx, cy) = (win_w / CELL, win_h / CELL);
    let grid = BlockGrid::from_cells(&cell_histograms(p, x, y, cx, cy), cx, cy);
    Ok(HogDescriptor {
        blocks_x: grid.blocks_x,
        blocks_y: grid.blocks_y,
        vector: grid.window(0, 0, grid.blocks_x, grid.blocks_y),
    })
}
