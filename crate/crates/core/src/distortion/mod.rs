//! The four degradation ladders: compression (QP), resolution, white noise
//! and brightness, plus their per-level statistics.

mod dct;
mod entropy;
mod ladder;
mod ops;

pub use dct::{compress_dct, compress_dct_with_step, qp_step, MAX_QP};
pub use entropy::{decode_blocks, encode_blocks, BitReader, BitWriter};
pub use ladder::{
    build_ladder, build_ladder_with, ladder_stats, write_stats_csv, ExternalEncoder, LadderStatsRow,
    ENCODER_ENV, FINE_QP,
};
pub use ops::{add_gaussian_noise, adjust_brightness, downscale, scaled_dims, upscale_nearest};
pub(crate) use ladder::frame_name;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistortionKind {
    Qp,
    Res,
    Wn,
    Bv,
}

impl DistortionKind {
    pub const ALL: [DistortionKind; 4] = [
        DistortionKind::Qp,
        DistortionKind::Res,
        DistortionKind::Wn,
        DistortionKind::Bv,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DistortionKind::Qp => "qp",
            DistortionKind::Res => "res",
            DistortionKind::Wn => "wn",
            DistortionKind::Bv => "bv",
        }
    }
}

impl fmt::Display for DistortionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DistortionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "qp" => Ok(DistortionKind::Qp),
            "res" => Ok(DistortionKind::Res),
            "wn" => Ok(DistortionKind::Wn),
            "bv" => Ok(DistortionKind::Bv),
            other => Err(Error::InvalidParam(format!(
                "unknown distortion kind {other:?} (expected qp, res, wn or bv)"
            ))),
        }
    }
}

/// One distortion instance.
///
/// `param` is the QP for `qp`, the scale fraction for `res`, the noise σ on the
/// normalized pixel scale for `wn`, and the signed normalized offset for `bv`.
/// `seed` is only meaningful for `wn`, where frame `i` uses `seed + i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistortionSpec {
    #[serde(rename = "type")]
    pub kind: DistortionKind,
    pub level: u32,
    pub param: f64,
    #[serde(default)]
    pub seed: u64,
}

impl DistortionSpec {
    pub fn new(kind: DistortionKind, level: u32, param: f64, seed: u64) -> Self {
        DistortionSpec {
            kind,
            level,
            param,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.level == 0 {
            return Err(Error::InvalidParam("distortion levels are 1-based".into()));
        }
        check_param(self.kind, self.param)
    }
}

pub(crate) fn check_param(kind: DistortionKind, p: f64) -> Result<()> {
    let ok = p.is_finite()
        && match kind {
            DistortionKind::Qp => p.fract() == 0.0 && (0.0..=f64::from(MAX_QP)).contains(&p),
            DistortionKind::Res | DistortionKind::Wn => p > 0.0 && p <= 1.0,
            DistortionKind::Bv => (-1.0..=1.0).contains(&p) && p != 0.0,
        };
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidParam(format!("{p} is not a valid {kind} parameter")))
    }
}

/// Level grids for every distortion kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LadderConfig {
    pub qp_levels: Vec<u32>,
    pub res_scales: Vec<f64>,
    pub wn_sigmas: Vec<f64>,
    pub bv_offsets: Vec<f64>,
    /// Base seed for white noise.
    pub seed: u64,
}

impl Default for LadderConfig {
    fn default() -> Self {
        // constant down-sampling step for levels 1-7, finer steps afterwards
        let mut res_scales: Vec<f64> = (1..=7).map(|k| 1.0 - f64::from(k) / 8.0).collect();
        res_scales.extend([1.0 / 12.0, 1.0 / 16.0, 1.0 / 24.0, 1.0 / 32.0]);
        // 20 log-spaced values from 0.005 to 0.5
        let wn_sigmas = (0..20)
            .map(|k| 0.005 * 100f64.powf(f64::from(k) / 19.0))
            .collect();
        LadderConfig {
            qp_levels: vec![10, 15, 20, 25, 30, 35, 40, 45, 50, 58, 65],
            res_scales,
            wn_sigmas,
            bv_offsets: vec![-0.4, -0.3, -0.2, -0.1, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6],
            seed: 0x5eed,
        }
    }
}

impl LadderConfig {
    /// Parameters of `kind`'s ladder in level order (level = index + 1).
    pub fn params(&self, kind: DistortionKind) -> Vec<f64> {
        match kind {
            DistortionKind::Qp => self.qp_levels.iter().map(|&q| f64::from(q)).collect(),
            DistortionKind::Res => self.res_scales.clone(),
            DistortionKind::Wn => self.wn_sigmas.clone(),
            DistortionKind::Bv => self.bv_offsets.clone(),
        }
    }

    pub fn len(&self) -> usize {
        DistortionKind::ALL.iter().map(|&k| self.params(k).len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn validate(&self) -> Result<()> {
        let strictly = |v: &[f64], increasing: bool| {
            v.windows(2)
                .all(|w| if increasing { w[0] < w[1] } else { w[0] > w[1] })
        };
        for kind in DistortionKind::ALL {
            for p in self.params(kind) {
                check_param(kind, p)?;
            }
        }
        if !strictly(&self.params(DistortionKind::Qp), true) {
            return Err(Error::InvalidParam("qp_levels must be strictly increasing".into()));
        }
        if !strictly(&self.res_scales, false) {
            return Err(Error::InvalidParam("res_scales must be strictly decreasing".into()));
        }
        if !strictly(&self.wn_sigmas, true) {
            return Err(Error::InvalidParam("wn_sigmas must be strictly increasing".into()));
        }
        let mut seen = self.bv_offsets.clone();
        seen.sort_by(f64::total_cmp);
        if seen.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidParam("bv_offsets contain duplicates".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_ladder_sizes() {
        let c = LadderConfig::default();
        c.validate().unwrap();
        assert_eq!(c.params(DistortionKind::Qp).len(), 11);
        assert_eq!(c.params(DistortionKind::Res).len(), 11);
        assert_eq!(c.params(DistortionKind::Wn).len(), 20);
        assert_eq!(c.params(DistortionKind::Bv).len(), 10);
        assert_eq!(c.len(), 52);
        assert_eq!(c.bv_offsets.iter().filter(|&&o| o < 0.0).count(), 4);
        assert_eq!(c.bv_offsets.iter().filter(|&&o| o > 0.0).count(), 6);
        assert_eq!(c.qp_levels.first(), Some(&10));
        assert_eq!(c.qp_levels.last(), Some(&65));
        assert!((c.wn_sigmas[0] - 0.005).abs() < 1e-15);
        assert!((c.wn_sigmas[19] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn default_resolution_reaches_24x18_from_768x576() {
        let c = LadderConfig::default();
        let last = *c.res_scales.last().unwrap();
        assert_eq!(scaled_dims(768, 576, last).unwrap(), (24, 18));
        assert_eq!(scaled_dims(768, 576, c.res_scales[0]).unwrap(), (672, 504));
    }

    #[test]
    fn invalid_configs() {
        let mut c = LadderConfig::default();
        c.bv_offsets.push(0.0);
        assert!(c.validate().is_err());
        let mut c = LadderConfig::default();
        c.qp_levels.swap(0, 1);
        assert!(c.validate().is_err());
        let mut c = LadderConfig::default();
        c.res_scales.reverse();
        assert!(c.validate().is_err());
        let mut c = LadderConfig::default();
        c.wn_sigmas.push(1.5);
        assert!(c.validate().is_err());
    }

    #[test]
    fn spec_param_ranges() {
        assert!(check_param(DistortionKind::Qp, 65.0).is_ok());
        assert!(check_param(DistortionKind::Qp, 66.0).is_err());
        assert!(check_param(DistortionKind::Qp, 10.5).is_err());
        assert!(check_param(DistortionKind::Res, 0.0).is_err());
        assert!(check_param(DistortionKind::Wn, 1.0).is_ok());
        assert!(check_param(DistortionKind::Bv, 0.0).is_err());
        assert!(check_param(DistortionKind::Bv, -1.0).is_ok());
    }

    #[test]
    fn kind_parsing() {
        assert_eq!("WN".parse::<DistortionKind>().unwrap(), DistortionKind::Wn);
        assert!("blur".parse::<DistortionKind>().is_err());
        let spec = DistortionSpec::new(DistortionKind::Bv, 2, -0.1, 0);
        let json = serde_json::to_string(&spec).unwrap();
        assert!(json.contains(r#""type":"bv""#));
    }
}
