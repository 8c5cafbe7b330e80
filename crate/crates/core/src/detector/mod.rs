//! Reference detector: synthetic scenes with exact ground truth and a HOG
//! template detector scanned over an image pyramid.

mod hog;
mod model;
mod scene;

pub use hog::{cell_histograms, hog_window, BlockGrid, HogDescriptor, Plane, BINS, BLOCK_LEN, CELL, CLIP};
pub use model::{nms, DetectorModel, DEFAULT_DETECTOR_ID};
pub use scene::{render_scene, synth_scene, BackgroundConfig, SceneConfig};

use crate::media::Image;
use crate::Result;

/// Descriptor of the model-sized window with top-left pixel `(x, y)` on the frame's luma.
pub fn hog(img: &Image, x: usize, y: usize, model: &DetectorModel) -> Result<HogDescriptor> {
    hog_window(&model::luma_plane(img), x, y, model.window_w, model.window_h)
}
