use serde::{Deserialize, Serialize};

use super::GroundTruthFrame;
use crate::{Error, Result};

/// Ground-truth height statistics; `h_vc = sigma_h / mu_h` is the coefficient
/// of variation of box heights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeightStats {
    pub mu_h: f64,
    /// Population standard deviation.
    pub sigma_h: f64,
    pub h_vc: f64,
}

pub fn height_stats(gts: &[GroundTruthFrame]) -> Result<HeightStats> {
    let heights: Vec<f64> = gts.iter().flat_map(|g| g.boxes.iter().map(|b| b.h)).collect();
    if heights.is_empty() {
        return Err(Error::ZeroGroundTruth);
    }
    let n = heights.len() as f64;
    let mu_h = heights.iter().sum::<f64>() / n;
    let sigma_h = (heights.iter().map(|h| (h - mu_h).powi(2)).sum::<f64>() / n).sqrt();
    Ok(HeightStats {
        mu_h,
        sigma_h,
        h_vc: sigma_h / mu_h,
    })
}

#[cfg(test)]
mod tests {
    use super::super::BoundingBox;
    use super::*;

    fn frames(heights: &[f64]) -> Vec<GroundTruthFrame> {
        heights
            .iter()
            .enumerate()
            .map(|(i, &h)| GroundTruthFrame {
                frame_id: i as u32,
                boxes: vec![BoundingBox::new(0.0, 0.0, 10.0, h).unwrap()],
            })
            .collect()
    }

    #[test]
    fn constant_heights() {
        assert_eq!(height_stats(&frames(&[80.0; 5])).unwrap().h_vc, 0.0);
    }

    #[test]
    fn population_moments() {
        let s = height_stats(&frames(&[90.0, 110.0, 90.0, 110.0])).unwrap();
        assert_eq!((s.mu_h, s.sigma_h), (100.0, 10.0));
        assert!((s.h_vc - 0.1).abs() < 1e-15);
        let s = height_stats(&frames(&[100.0, 120.0])).unwrap();
        assert_eq!((s.mu_h, s.sigma_h), (110.0, 10.0));
        assert!((s.h_vc - 1.0 / 11.0).abs() < 1e-15);
    }

    #[test]
    fn empty_is_error() {
        assert!(height_stats(&[]).is_err());
    }
}
