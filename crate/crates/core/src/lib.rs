//! Robustness benchmarking for object and pedestrian detectors.
//!
//! The crate is organised along the benchmark's data flow:
//!
//! 1. [`media`] – frames, PGM/PPM I/O, sequence manifests and quality statistics.
//! 2. [`distortion`] – the four degradation ladders (QP, resolution, white noise,
//!    brightness) and their statistics.
//! 3. [`detector`] – a synthetic scene generator with exact ground truth and a
//!    small HOG template detector.
//! 4. [`eval`] – box matching, miss-rate/FPPI curves, log-average miss rate and accuracy.
//! 5. [`stability`] – degradation and monotonicity penalties and the stability vector.
//! 6. [`quadrangle`] – robustness quadrangle geometry, SVG charts and rankings.
//! 7. [`pipeline`] – end-to-end orchestration and the persisted run report.

pub mod detector;
pub mod distortion;
pub mod error;
pub mod eval;
pub mod media;
pub mod pipeline;
pub mod quadrangle;
pub mod serde_util;
pub mod stability;

pub use error::{Error, Result};

/// Round half away from zero, used for every real-to-integer conversion.
#[inline]
pub(crate) fn round_half_away(v: f64) -> f64 {
    v.round()
}

/// Quantize a real sample on the 0..=255 scale back to 8 bits.
#[inline]
pub(crate) fn quantize_u8(v: f64) -> u8 {
    round_half_away(v.clamp(0.0, 255.0)) as u8
}
