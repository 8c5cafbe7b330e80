//! Ladder construction over whole sequences and per-level statistics.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use rayon::prelude::*;

use super::{
    add_gaussian_noise, adjust_brightness, compress_dct, downscale, upscale_nearest, DistortionKind,
    DistortionSpec, LadderConfig,
};
use crate::eval::{read_ground_truth, write_ground_truth};
use crate::media::{
    mean_luma, save_frame, sequence_psnr_frames, Image, PnmFormat, QualityStats, SequenceManifest,
    SequenceRole,
};
use crate::serde_util::format_f64;
use crate::{Error, Result};

/// Environment variable holding the external encoder command template.
pub const ENCODER_ENV: &str = "ROBENCH_ENCODER_CMD";

/// Fixed fine quantizer (step 1) used to size resolution-ladder frames.
pub const FINE_QP: u32 = 4;

/// Highest QP a real H.264 encoder accepts.
const H264_MAX_QP: u32 = 51;

/// Replace the surrogate coder on the QP ladder with an external program.
///
/// The template is run through `sh -c` once per sequence after substituting
/// `{in}` (directory of input frames `frame_NNNNN.pgm|ppm`), `{out}` (output
/// directory) and `{qp}`. The command must leave decoded frames with the same
/// file names in `{out}` together with the coded bitstream `{out}/stream.bin`,
/// whose size becomes the sequence's `encoded_bytes`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExternalEncoder {
    pub template: String,
}

impl ExternalEncoder {
    pub fn from_env() -> Option<Self> {
        std::env::var(ENCODER_ENV)
            .ok()
            .filter(|t| !t.trim().is_empty())
            .map(|template| ExternalEncoder { template })
    }

    fn run(&self, frames: &[Image], fmt: PnmFormat, qp: u32, work: &Path, out: &Path) -> Result<(Vec<Image>, u64)> {
        if qp > H264_MAX_QP {
            log::warn!("qp {qp} exceeds the H.264 maximum of {H264_MAX_QP}; passing it to the external encoder anyway");
        }
        fs::create_dir_all(work).map_err(|e| Error::io(work, e))?;
        for (i, f) in frames.iter().enumerate() {
            save_frame(f, &work.join(frame_name(i, fmt)), fmt)?;
        }
        let cmd = self
            .template
            .replace("{in}", &work.to_string_lossy())
            .replace("{out}", &out.to_string_lossy())
            .replace("{qp}", &qp.to_string());
        let status = Command::new("sh")
            .arg("-c")
            .arg(&cmd)
            .status()
            .map_err(|e| Error::Encoder(format!("cannot spawn `{cmd}`: {e}")))?;
        if !status.success() {
            return Err(Error::Encoder(format!("`{cmd}` exited with {status}")));
        }
        let decoded = (0..frames.len())
            .map(|i| crate::media::load_frame(&out.join(frame_name(i, fmt)), fmt))
            .collect::<Result<Vec<_>>>()?;
        for (a, b) in frames.iter().zip(&decoded) {
            if !a.same_shape(b) {
                return Err(Error::Encoder("decoded frame geometry differs from input".into()));
            }
        }
        let stream = out.join("stream.bin");
        let bytes = fs::metadata(&stream)
            .map_err(|e| Error::Encoder(format!("missing {}: {e}", stream.display())))?
            .len();
        let _ = fs::remove_dir_all(work);
        Ok((decoded, bytes))
    }
}

pub(crate) fn frame_name(i: usize, fmt: PnmFormat) -> String {
    format!("frame_{i:05}.{}", fmt.extension())
}

fn seed_policy(kind: DistortionKind) -> String {
    match kind {
        DistortionKind::Wn => "frame i uses seed + i (ChaCha8, Gaussian)".to_string(),
        _ => "deterministic; no random draws".to_string(),
    }
}

/// Apply one distortion to one frame. Returns the frame and, for `qp`, the coded size.
pub(crate) fn distort_frame(img: &Image, spec: &DistortionSpec, frame_index: usize) -> Result<(Image, Option<u64>)> {
    match spec.kind {
        DistortionKind::Qp => {
            let (out, bytes) = compress_dct(img, spec.param as u32)?;
            Ok((out, Some(bytes as u64)))
        }
        DistortionKind::Res => Ok((downscale(img, spec.param)?, None)),
        DistortionKind::Wn => Ok((
            add_gaussian_noise(img, spec.param, spec.seed.wrapping_add(frame_index as u64))?,
            None,
        )),
        DistortionKind::Bv => Ok((adjust_brightness(img, spec.param)?, None)),
    }
}

/// [`build_ladder_with`] using the encoder named by `ROBENCH_ENCODER_CMD`, if any.
pub fn build_ladder(
    reference: &SequenceManifest,
    kind: DistortionKind,
    config: &LadderConfig,
    out_dir: &Path,
) -> Result<Vec<SequenceManifest>> {
    build_ladder_with(reference, kind, config, out_dir, ExternalEncoder::from_env().as_ref())
}

/// Write one distorted sequence per level of `kind` under
/// `out_dir/<reference>_<kind><level>/` and return their manifests in level order.
pub fn build_ladder_with(
    reference: &SequenceManifest,
    kind: DistortionKind,
    config: &LadderConfig,
    out_dir: &Path,
    encoder: Option<&ExternalEncoder>,
) -> Result<Vec<SequenceManifest>> {
    if reference.role != SequenceRole::Reference {
        return Err(Error::InvalidParam(format!(
            "{} is not a reference sequence",
            reference.sequence_id
        )));
    }
    config.validate()?;
    let params = config.params(kind);
    if params.is_empty() {
        return Err(Error::Empty(format!("no {kind} levels configured")));
    }
    let frames = reference.load_frames()?;
    let fmt = PnmFormat::for_channels(frames[0].channels()).expect("images have 1 or 3 channels");
    let (ref_w, ref_h) = (frames[0].width(), frames[0].height());
    let ground_truth = reference
        .ground_truth
        .as_deref()
        .map(read_ground_truth)
        .transpose()?;

    let mut manifests = Vec::with_capacity(params.len());
    for (i, &param) in params.iter().enumerate() {
        let seed = if kind == DistortionKind::Wn { config.seed } else { 0 };
        let spec = DistortionSpec::new(kind, i as u32 + 1, param, seed);
        let seq_id = format!("{}_{}{:02}", reference.sequence_id, kind, spec.level);
        let dir = out_dir.join(&seq_id);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;

        let (distorted, encoded_bytes) = match (kind, encoder) {
            (DistortionKind::Qp, Some(enc)) => {
                let work = out_dir.join(format!(".{seq_id}.in"));
                let (frames, bytes) = enc.run(&frames, fmt, param as u32, &work, &dir)?;
                (frames, Some(bytes))
            }
            _ => {
                let results = frames
                    .par_iter()
                    .enumerate()
                    .map(|(fi, f)| distort_frame(f, &spec, fi))
                    .collect::<Result<Vec<_>>>()?;
                let bytes = results.iter().map(|r| r.1).sum::<Option<u64>>();
                (results.into_iter().map(|r| r.0).collect::<Vec<_>>(), bytes)
            }
        };

        let paths: Vec<PathBuf> = (0..distorted.len()).map(|fi| dir.join(frame_name(fi, fmt))).collect();
        distorted
            .par_iter()
            .zip(paths.par_iter())
            .try_for_each(|(img, p)| save_frame(img, p, fmt))?;

        let gt_path = match &ground_truth {
            Some(gt) => {
                let (w, h) = (distorted[0].width(), distorted[0].height());
                let sx = w as f64 / ref_w as f64;
                let sy = h as f64 / ref_h as f64;
                let scaled: Vec<_> = gt.iter().map(|f| f.scaled(sx, sy)).collect();
                let p = dir.join("gt.csv");
                write_ground_truth(&p, &scaled)?;
                Some(p)
            }
            None => None,
        };

        let manifest = SequenceManifest {
            sequence_id: seq_id,
            role: SequenceRole::Distorted,
            frame_paths: paths,
            distortion: Some(spec),
            parent_id: Some(reference.sequence_id.clone()),
            ground_truth: gt_path,
            encoded_bytes,
            seed_policy: Some(seed_policy(kind)),
        };
        manifest.write(&dir.join("manifest.json"))?;
        manifests.push(manifest);
    }
    Ok(manifests)
}

/// One row of the ladder statistics table. `kind = None` is the reference row.
#[derive(Debug, Clone, PartialEq)]
pub struct LadderStatsRow {
    pub kind: Option<DistortionKind>,
    pub level: u32,
    pub param: f64,
    pub stats: QualityStats,
}

fn coded_size(frames: &[Image]) -> Result<u64> {
    frames
        .par_iter()
        .map(|f| compress_dct(f, FINE_QP).map(|(_, b)| b as u64))
        .sum()
}

/// Per-level quality statistics for ladders derived from `reference`.
///
/// * `qp`: PSNR against the reference; ratio = raw bytes / coded bytes.
/// * `res`: frames are nearest-neighbour upscaled back to the reference size
///   for PSNR; both reference and distorted frames are sized with the
///   coefficient coder at [`FINE_QP`], so the ratio tracks the pixel-count ratio.
/// * `wn`, `bv`: PSNR against the reference; sizes are raw, ratio 1.
///
/// The first row is the reference itself (level 0, PSNR `+∞`, ratio 1).
pub fn ladder_stats(reference: &SequenceManifest, ladders: &[SequenceManifest]) -> Result<Vec<LadderStatsRow>> {
    let ref_frames = reference.load_frames()?;
    let raw_ref: u64 = ref_frames.iter().map(|f| f.samples().len() as u64).sum();
    let mut rows = vec![LadderStatsRow {
        kind: None,
        level: 0,
        param: 0.0,
        stats: sequence_psnr_frames(&ref_frames, &ref_frames, Some(raw_ref))?,
    }];
    let mut ref_coded = None;
    for m in ladders {
        if m.parent_id.as_deref() != Some(reference.sequence_id.as_str()) {
            return Err(Error::Manifest(format!(
                "{} was not derived from {}",
                m.sequence_id, reference.sequence_id
            )));
        }
        let spec = m
            .distortion
            .ok_or_else(|| Error::Manifest(format!("{} has no distortion", m.sequence_id)))?;
        let frames = m.load_frames()?;
        let stats = match spec.kind {
            DistortionKind::Res => {
                let (w, h) = (ref_frames[0].width(), ref_frames[0].height());
                let up = frames
                    .par_iter()
                    .map(|f| upscale_nearest(f, w, h))
                    .collect::<Result<Vec<_>>>()?;
                let psnr = sequence_psnr_frames(&ref_frames, &up, None)?.psnr_db;
                let mean = frames.iter().map(mean_luma).sum::<f64>() / frames.len() as f64;
                let original = match ref_coded {
                    Some(v) => v,
                    None => *ref_coded.insert(coded_size(&ref_frames)?),
                };
                QualityStats::new(psnr, mean, original, coded_size(&frames)?)
            }
            _ => sequence_psnr_frames(&ref_frames, &frames, m.encoded_bytes)?,
        };
        rows.push(LadderStatsRow {
            kind: Some(spec.kind),
            level: spec.level,
            param: spec.param,
            stats,
        });
    }
    Ok(rows)
}

/// CSV with columns `kind,level,param,psnr_db,mean_luma,original_bytes,encoded_bytes,compression_ratio`.
pub fn write_stats_csv(path: &Path, rows: &[LadderStatsRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "kind",
        "level",
        "param",
        "psnr_db",
        "mean_luma",
        "original_bytes",
        "encoded_bytes",
        "compression_ratio",
    ])?;
    for r in rows {
        w.write_record([
            r.kind.map_or("ref", DistortionKind::as_str).to_string(),
            r.level.to_string(),
            format_f64(r.param),
            format_f64(r.stats.psnr_db),
            format!("{:.4}", r.stats.mean_luma),
            r.stats.original_bytes.to_string(),
            r.stats.encoded_bytes.to_string(),
            format!("{:.6}", r.stats.compression_ratio),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
