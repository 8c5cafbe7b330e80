//! Full-frame quality statistics: PSNR, mean luma and byte accounting.

use serde::{Deserialize, Serialize};

use super::{Image, SequenceManifest};
use crate::{Error, Result};

const PEAK_SQ: f64 = 255.0 * 255.0;

/// Per-sequence quality summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityStats {
    /// `+∞` iff the sequences are bit-identical.
    #[serde(with = "crate::serde_util::f64_or_inf")]
    pub psnr_db: f64,
    pub mean_luma: f64,
    pub original_bytes: u64,
    pub encoded_bytes: u64,
    pub compression_ratio: f64,
}

impl QualityStats {
    pub fn new(psnr_db: f64, mean_luma: f64, original_bytes: u64, encoded_bytes: u64) -> Self {
        let compression_ratio = if encoded_bytes > 0 {
            original_bytes as f64 / encoded_bytes as f64
        } else {
            0.0
        };
        QualityStats {
            psnr_db,
            mean_luma,
            original_bytes,
            encoded_bytes,
            compression_ratio,
        }
    }
}

fn check_shapes(a: &Image, b: &Image) -> Result<()> {
    if a.same_shape(b) {
        Ok(())
    } else {
        Err(Error::DimensionMismatch(format!(
            "{}x{}x{} vs {}x{}x{}",
            a.width(),
            a.height(),
            a.channels(),
            b.width(),
            b.height(),
            b.channels()
        )))
    }
}

fn squared_error(a: &Image, b: &Image) -> f64 {
    a.samples()
        .iter()
        .zip(b.samples())
        .map(|(&x, &y)| {
            let d = f64::from(x) - f64::from(y);
            d * d
        })
        .sum()
}

/// Mean squared error over all raw samples of all channels.
pub fn frame_mse(a: &Image, b: &Image) -> Result<f64> {
    check_shapes(a, b)?;
    Ok(squared_error(a, b) / a.samples().len() as f64)
}

pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (PEAK_SQ / mse).log10()
    }
}

/// `10·log10(255² / MSE)` in dB; `+∞` for identical frames.
pub fn psnr(a: &Image, b: &Image) -> Result<f64> {
    Ok(psnr_from_mse(frame_mse(a, b)?))
}

/// Average BT.601 luma over all pixels, on the 0..=255 scale.
pub fn mean_luma(img: &Image) -> f64 {
    let luma = img.luma();
    luma.iter().sum::<f64>() / luma.len() as f64
}

/// Sequence-level statistics from already-loaded frames.
///
/// PSNR pools the squared error of all frames before taking the log, so a
/// sequence containing some identical frames still has a finite PSNR.
/// `encoded_bytes` defaults to the raw size of the distorted frames.
pub fn sequence_psnr_frames(
    reference: &[Image],
    distorted: &[Image],
    encoded_bytes: Option<u64>,
) -> Result<QualityStats> {
    if reference.len() != distorted.len() {
        return Err(Error::DimensionMismatch(format!(
            "frame counts differ: {} vs {}",
            reference.len(),
            distorted.len()
        )));
    }
    if reference.is_empty() {
        return Err(Error::Empty("sequence has no frames".into()));
    }
    let mut sq = 0.0;
    let mut n = 0usize;
    for (a, b) in reference.iter().zip(distorted) {
        check_shapes(a, b)?;
        sq += squared_error(a, b);
        n += a.samples().len();
    }
    let mean_luma = distorted.iter().map(mean_luma).sum::<f64>() / distorted.len() as f64;
    let original: u64 = reference.iter().map(|f| f.samples().len() as u64).sum();
    let raw_distorted: u64 = distorted.iter().map(|f| f.samples().len() as u64).sum();
    Ok(QualityStats::new(
        psnr_from_mse(sq / n as f64),
        mean_luma,
        original,
        encoded_bytes.unwrap_or(raw_distorted),
    ))
}

/// Load both sequences and compute [`sequence_psnr_frames`]; the distorted
/// manifest's recorded `encoded_bytes` is used when present.
pub fn sequence_psnr(reference: &SequenceManifest, distorted: &SequenceManifest) -> Result<QualityStats> {
    if reference.frame_paths.len() != distorted.frame_paths.len() {
        return Err(Error::DimensionMismatch(format!(
            "frame counts differ: {} vs {}",
            reference.frame_paths.len(),
            distorted.frame_paths.len()
        )));
    }
    let a = reference.load_frames()?;
    let b = distorted.load_frames()?;
    sequence_psnr_frames(&a, &b, distorted.encoded_bytes)
}
