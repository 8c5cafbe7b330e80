use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::pnm::{load_frame, PnmFormat};
use super::Image;
use crate::distortion::DistortionSpec;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SequenceRole {
    Reference,
    Distorted,
}

/// One version (reference or distorted) of a frame sequence.
///
/// On disk, frame and ground-truth paths are stored relative to the manifest
/// file; [`SequenceManifest::read`] resolves them against the manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceManifest {
    pub sequence_id: String,
    pub role: SequenceRole,
    pub frame_paths: Vec<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distortion: Option<DistortionSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent_id: Option<String>,
    /// Ground-truth CSV matching this sequence's frame geometry.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<PathBuf>,
    /// Size of the coded representation, when the sequence came out of an encoder.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub encoded_bytes: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed_policy: Option<String>,
}

impl SequenceManifest {
    pub fn reference(sequence_id: impl Into<String>, frame_paths: Vec<PathBuf>) -> Self {
        SequenceManifest {
            sequence_id: sequence_id.into(),
            role: SequenceRole::Reference,
            frame_paths,
            distortion: None,
            parent_id: None,
            ground_truth: None,
            encoded_bytes: None,
            seed_policy: None,
        }
    }

    /// Structural checks that do not touch the frames themselves.
    pub fn validate(&self) -> Result<()> {
        if self.sequence_id.is_empty() {
            return Err(Error::Manifest("sequence_id is empty".into()));
        }
        if self.frame_paths.is_empty() {
            return Err(Error::Manifest(format!("{}: no frames", self.sequence_id)));
        }
        match self.role {
            SequenceRole::Distorted if self.distortion.is_none() || self.parent_id.is_none() => {
                Err(Error::Manifest(format!(
                    "{}: distorted sequences need distortion and parent_id",
                    self.sequence_id
                )))
            }
            _ => {
                if let Some(d) = &self.distortion {
                    d.validate()?;
                }
                Ok(())
            }
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut m: SequenceManifest = serde_json::from_str(&text)
            .map_err(|e| Error::Manifest(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in &mut m.frame_paths {
            *p = base.join(&*p);
        }
        if let Some(gt) = &mut m.ground_truth {
            *gt = base.join(&*gt);
        }
        m.validate()?;
        Ok(m)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        self.validate()?;
        let base = path.parent().unwrap_or(Path::new(""));
        let rel = |p: &PathBuf| p.strip_prefix(base).map(Path::to_path_buf).unwrap_or_else(|_| p.clone());
        let mut m = self.clone();
        m.frame_paths = self.frame_paths.iter().map(rel).collect();
        m.ground_truth = self.ground_truth.as_ref().map(rel);
        let mut text = serde_json::to_string_pretty(&m)?;
        text.push('\n');
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// Load every frame, checking that all share one geometry.
    pub fn load_frames(&self) -> Result<Vec<Image>> {
        let mut frames: Vec<Image> = Vec::with_capacity(self.frame_paths.len());
        for p in &self.frame_paths {
            let fmt = PnmFormat::from_path(p).ok_or_else(|| {
                Error::Manifest(format!("{}: frame extension must be .pgm or .ppm", p.display()))
            })?;
            let img = load_frame(p, fmt)?;
            if let Some(first) = frames.first() {
                if !first.same_shape(&img) {
                    return Err(Error::DimensionMismatch(format!(
                        "{}: frame {} differs in geometry from the first frame",
                        self.sequence_id,
                        p.display()
                    )));
                }
            }
            frames.push(img);
        }
        Ok(frames)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distortion::DistortionKind;

    #[test]
    fn distorted_needs_parent_and_spec() {
        let mut m = SequenceManifest::reference("a", vec!["f.pgm".into()]);
        m.role = SequenceRole::Distorted;
        assert!(m.validate().is_err());
        m.parent_id = Some("ref".into());
        m.distortion = Some(DistortionSpec::new(DistortionKind::Qp, 1, 10.0, 0));
        assert!(m.validate().is_ok());
    }

    #[test]
    fn empty_frames_rejected() {
        assert!(SequenceManifest::reference("a", vec![]).validate().is_err());
    }

    #[test]
    fn paths_are_relative_on_disk() {
        let dir = tempfile::tempdir().unwrap();
        let img = Image::filled(2, 2, 1, 5).unwrap();
        let frame = dir.path().join("f0.pgm");
        super::super::save_frame(&img, &frame, PnmFormat::Pgm).unwrap();
        let m = SequenceManifest::reference("seq", vec![frame.clone()]);
        let mpath = dir.path().join("manifest.json");
        m.write(&mpath).unwrap();
        let text = fs::read_to_string(&mpath).unwrap();
        assert!(text.contains("\"f0.pgm\""));
        let back = SequenceManifest::read(&mpath).unwrap();
        assert_eq!(back.frame_paths, vec![frame]);
        assert_eq!(back.load_frames().unwrap(), vec![img]);
    }

    #[test]
    fn mixed_geometry_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.pgm");
        let b = dir.path().join("b.pgm");
        super::super::save_frame(&Image::filled(2, 2, 1, 5).unwrap(), &a, PnmFormat::Pgm).unwrap();
        super::super::save_frame(&Image::filled(3, 2, 1, 5).unwrap(), &b, PnmFormat::Pgm).unwrap();
        let m = SequenceManifest::reference("seq", vec![a, b]);
        assert!(matches!(m.load_frames(), Err(Error::DimensionMismatch(_))));
    }
}
