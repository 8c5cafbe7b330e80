//! Block-DCT compression surrogate with the H.264 quantizer step law.
//!
//! Each channel is split into 8×8 blocks (edge blocks replicate their last
//! row/column and are cropped after reconstruction), level-shifted by −128,
//! transformed with an orthonormal 2-D DCT-II and uniformly quantized with
//! `step = 2^((qp − 4) / 6)`. Reconstruction is `q · step` followed by the
//! inverse transform, clipping and re-quantization to 8 bits.

use std::sync::OnceLock;

use super::entropy::{encode_blocks, BitWriter};
use crate::media::Image;
use crate::{quantize_u8, round_half_away, Error, Result};

pub const MAX_QP: u32 = 65;

/// Quantizer step for `qp`; grows by 2^(1/6) (about 12 %) per unit of QP.
pub fn qp_step(qp: u32) -> f64 {
    2f64.powf((f64::from(qp) - 4.0) / 6.0)
}

fn basis() -> &'static [[f64; 8]; 8] {
    static BASIS: OnceLock<[[f64; 8]; 8]> = OnceLock::new();
    BASIS.get_or_init(|| {
        let mut m = [[0.0; 8]; 8];
        for (k, row) in m.iter_mut().enumerate() {
            let scale = if k == 0 { (1.0f64 / 8.0).sqrt() } else { (2.0f64 / 8.0).sqrt() };
            for (n, v) in row.iter_mut().enumerate() {
                *v = scale * (std::f64::consts::PI * (2 * n + 1) as f64 * k as f64 / 16.0).cos();
            }
        }
        m
    })
}

/// `out = C · x · Cᵀ` (forward) or `Cᵀ · x · C` (inverse).
fn transform(x: &[f64; 64], inverse: bool) -> [f64; 64] {
    let c = basis();
    let coef = |i: usize, j: usize| if inverse { c[j][i] } else { c[i][j] };
    let mut tmp = [0.0; 64];
    for i in 0..8 {
        for j in 0..8 {
            tmp[i * 8 + j] = (0..8).map(|k| coef(i, k) * x[k * 8 + j]).sum();
        }
    }
    let mut out = [0.0; 64];
    for i in 0..8 {
        for j in 0..8 {
            out[i * 8 + j] = (0..8).map(|k| tmp[i * 8 + k] * coef(j, k)).sum();
        }
    }
    out
}

pub(crate) fn forward_dct(x: &[f64; 64]) -> [f64; 64] {
    transform(x, false)
}

pub(crate) fn inverse_dct(x: &[f64; 64]) -> [f64; 64] {
    transform(x, true)
}

/// Quantize one plane; returns the reconstructed plane and the quantized blocks.
fn code_plane(plane: &[u8], width: usize, height: usize, step: f64) -> (Vec<u8>, Vec<[i32; 64]>) {
    let bw = width.div_ceil(8);
    let bh = height.div_ceil(8);
    let mut out = vec![0u8; width * height];
    let mut blocks = Vec::with_capacity(bw * bh);
    for by in 0..bh {
        for bx in 0..bw {
            let mut x = [0.0; 64];
            for r in 0..8 {
                let sy = (by * 8 + r).min(height - 1);
                for c in 0..8 {
                    let sx = (bx * 8 + c).min(width - 1);
                    x[r * 8 + c] = f64::from(plane[sy * width + sx]) - 128.0;
                }
            }
            let coeffs = forward_dct(&x);
            let mut q = [0i32; 64];
            let mut recon = [0.0; 64];
            for i in 0..64 {
                q[i] = round_half_away(coeffs[i] / step) as i32;
                recon[i] = f64::from(q[i]) * step;
            }
            let pixels = inverse_dct(&recon);
            for r in 0..8 {
                let y = by * 8 + r;
                if y >= height {
                    break;
                }
                for c in 0..8 {
                    let xx = bx * 8 + c;
                    if xx >= width {
                        break;
                    }
                    out[y * width + xx] = quantize_u8(pixels[r * 8 + c] + 128.0);
                }
            }
            blocks.push(q);
        }
    }
    (out, blocks)
}

/// Compress with an explicit quantizer step. Returns the reconstruction and
/// the size in bytes of the entropy-coded coefficient stream.
pub fn compress_dct_with_step(img: &Image, step: f64) -> Result<(Image, usize)> {
    if !(step.is_finite() && step > 0.0) {
        return Err(Error::InvalidParam(format!("quantizer step {step} must be positive")));
    }
    let (w, h) = (img.width(), img.height());
    let mut writer = BitWriter::new();
    let mut planes = Vec::with_capacity(img.channels());
    for c in 0..img.channels() {
        let (plane, blocks) = code_plane(&img.plane(c), w, h, step);
        encode_blocks(&blocks, &mut writer);
        planes.push(plane);
    }
    let bytes = writer.finish().len();
    Ok((Image::from_planes(w, h, &planes)?, bytes))
}

/// Compress at quantization parameter `qp` ∈ [0, 65].
pub fn compress_dct(img: &Image, qp: u32) -> Result<(Image, usize)> {
    if qp > MAX_QP {
        return Err(Error::InvalidParam(format!("qp {qp} outside [0, {MAX_QP}]")));
    }
    compress_dct_with_step(img, qp_step(qp))
}
