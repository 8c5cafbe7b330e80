//! Pixel-domain distortions: additive white noise, brightness offset and
//! box-filter down-scaling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::media::Image;
use crate::{quantize_u8, round_half_away, Error, Result};

/// Add zero-mean Gaussian noise with standard deviation `sigma` on the
/// normalized `[0, 1]` scale, clip, and re-quantize to 8 bits.
pub fn add_gaussian_noise(img: &Image, sigma: f64, seed: u64) -> Result<Image> {
    if !(sigma > 0.0 && sigma <= 1.0) {
        return Err(Error::InvalidParam(format!("noise sigma {sigma} outside (0, 1]")));
    }
    let normal = Normal::new(0.0, sigma * 255.0)
        .map_err(|e| Error::InvalidParam(format!("noise sigma {sigma}: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = img
        .samples()
        .iter()
        .map(|&v| quantize_u8(f64::from(v) + normal.sample(&mut rng)))
        .collect();
    Image::new(img.width(), img.height(), img.channels(), data)
}

/// Add `offset` (normalized scale) to every sample of every channel, with clipping.
pub fn adjust_brightness(img: &Image, offset: f64) -> Result<Image> {
    if !(-1.0..=1.0).contains(&offset) {
        return Err(Error::InvalidParam(format!("brightness offset {offset} outside [-1, 1]")));
    }
    let shift = offset * 255.0;
    Ok(img.map_samples(|v| quantize_u8(f64::from(v) + shift)))
}

/// Output geometry of [`downscale`].
pub fn scaled_dims(width: usize, height: usize, scale: f64) -> Result<(usize, usize)> {
    if !(scale > 0.0 && scale <= 1.0) {
        return Err(Error::InvalidParam(format!("scale {scale} outside (0, 1]")));
    }
    let w = round_half_away(width as f64 * scale) as usize;
    let h = round_half_away(height as f64 * scale) as usize;
    if w == 0 || h == 0 {
        return Err(Error::InvalidParam(format!(
            "scale {scale} reduces {width}x{height} to {w}x{h}"
        )));
    }
    Ok((w, h))
}

/// Area-coverage weights: for each destination index, the source indices it
/// overlaps and the overlap length.
fn box_weights(src: usize, dst: usize) -> Vec<Vec<(usize, f64)>> {
    let ratio = src as f64 / dst as f64;
    (0..dst)
        .map(|d| {
            let lo = d as f64 * ratio;
            let hi = ((d + 1) as f64 * ratio).min(src as f64);
            let first = lo.floor() as usize;
            let last = (hi.ceil() as usize).min(src);
            (first..last)
                .filter_map(|s| {
                    let overlap = hi.min((s + 1) as f64) - lo.max(s as f64);
                    (overlap > 0.0).then_some((s, overlap))
                })
                .collect()
        })
        .collect()
}

/// Box-filter down-scaling: each destination pixel averages the exact
/// (fractional) source footprint it covers.
pub fn downscale(img: &Image, scale: f64) -> Result<Image> {
    let (w, h) = scaled_dims(img.width(), img.height(), scale)?;
    if (w, h) == (img.width(), img.height()) {
        return Ok(img.clone());
    }
    let c = img.channels();
    let xw = box_weights(img.width(), w);
    let yw = box_weights(img.height(), h);
    let src = img.samples();

    // horizontal pass
    let mut rows = vec![0.0f64; img.height() * w * c];
    for y in 0..img.height() {
        for (dx, taps) in xw.iter().enumerate() {
            let norm: f64 = taps.iter().map(|t| t.1).sum();
            for ch in 0..c {
                let acc: f64 = taps
                    .iter()
                    .map(|&(sx, wt)| wt * f64::from(src[(y * img.width() + sx) * c + ch]))
                    .sum();
                rows[(y * w + dx) * c + ch] = acc / norm;
            }
        }
    }
    // vertical pass
    let mut out = vec![0u8; w * h * c];
    for (dy, taps) in yw.iter().enumerate() {
        let norm: f64 = taps.iter().map(|t| t.1).sum();
        for dx in 0..w {
            for ch in 0..c {
                let acc: f64 = taps
                    .iter()
                    .map(|&(sy, wt)| wt * rows[(sy * w + dx) * c + ch])
                    .sum();
                out[(dy * w + dx) * c + ch] = quantize_u8(acc / norm);
            }
        }
    }
    Image::new(w, h, c, out)
}

/// Nearest-neighbour resampling to an arbitrary (usually larger) size.
pub fn upscale_nearest(img: &Image, width: usize, height: usize) -> Result<Image> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidParam("target dimensions must be positive".into()));
    }
    let c = img.channels();
    let sx = img.width() as f64 / width as f64;
    let sy = img.height() as f64 / height as f64;
    let mut out = Vec::with_capacity(width * height * c);
    for y in 0..height {
        let yy = (((y as f64 + 0.5) * sy) as usize).min(img.height() - 1);
        for x in 0..width {
            let xx = (((x as f64 + 0.5) * sx) as usize).min(img.width() - 1);
            for ch in 0..c {
                out.push(img.sample(xx, yy, ch));
            }
        }
    }
    Image::new(width, height, c, out)
}
