//! Frame representation, PGM/PPM I/O, sequence manifests and quality statistics.

mod manifest;
mod pnm;
mod quality;

pub use manifest::{SequenceManifest, SequenceRole};
pub use pnm::{decode_pnm, encode_pnm, load_frame, save_frame, PnmFormat};
pub use quality::{frame_mse, mean_luma, psnr, psnr_from_mse, sequence_psnr, sequence_psnr_frames, QualityStats};

use crate::{Error, Result};

/// BT.601 luma weights for R, G and B.
pub const LUMA_WEIGHTS: [f64; 3] = [0.299, 0.587, 0.114];

/// A planar, row-major 8-bit raster with one (luma) or three (RGB) interleaved channels.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Image {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<u8>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidParam(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidParam(format!(
                "images have 1 or 3 channels, got {channels}"
            )));
        }
        let expected = width * height * channels;
        if data.len() != expected {
            return Err(Error::Size {
                expected,
                found: data.len(),
            });
        }
        Ok(Image {
            width,
            height,
            channels,
            data,
        })
    }

    /// An image with every sample set to `value`.
    pub fn filled(width: usize, height: usize, channels: usize, value: u8) -> Result<Self> {
        Self::new(width, height, channels, vec![value; width * height * channels])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn samples(&self) -> &[u8] {
        &self.data
    }

    pub fn into_samples(self) -> Vec<u8> {
        self.data
    }

    pub fn sample(&self, x: usize, y: usize, c: usize) -> u8 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    /// Sample on the normalized `[0, 1]` scale.
    pub fn normalized(&self, x: usize, y: usize, c: usize) -> f64 {
        f64::from(self.sample(x, y, c)) / 255.0
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    /// Luma plane on the 0..=255 scale (BT.601 for RGB).
    pub fn luma(&self) -> Vec<f64> {
        match self.channels {
            1 => self.data.iter().map(|&v| f64::from(v)).collect(),
            _ => self
                .data
                .chunks_exact(3)
                .map(|px| {
                    LUMA_WEIGHTS[0] * f64::from(px[0])
                        + LUMA_WEIGHTS[1] * f64::from(px[1])
                        + LUMA_WEIGHTS[2] * f64::from(px[2])
                })
                .collect(),
        }
    }

    /// Extract one channel as a single-channel plane.
    pub fn plane(&self, c: usize) -> Vec<u8> {
        self.data
            .iter()
            .skip(c)
            .step_by(self.channels)
            .copied()
            .collect()
    }

    /// Rebuild an image from per-channel planes of identical size.
    pub fn from_planes(width: usize, height: usize, planes: &[Vec<u8>]) -> Result<Self> {
        let channels = planes.len();
        let mut data = vec![0u8; width * height * channels];
        for (c, plane) in planes.iter().enumerate() {
            if plane.len() != width * height {
                return Err(Error::Size {
                    expected: width * height,
                    found: plane.len(),
                });
            }
            for (i, &v) in plane.iter().enumerate() {
                data[i * channels + c] = v;
            }
        }
        Self::new(width, height, channels, data)
    }

    /// Apply `f` to every sample, producing a new image of the same shape.
    pub fn map_samples(&self, f: impl Fn(u8) -> u8) -> Image {
        Image {
            data: self.data.iter().map(|&v| f(v)).collect(),
            ..self.clone()
        }
    }
}
