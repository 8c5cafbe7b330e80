//! End-to-end runs (scene → ladders → detection → evaluation → stability)
//! and the persisted run report.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detector::{synth_scene, DetectorModel, SceneConfig};
use crate::distortion::{
    build_ladder_with, ladder_stats, write_stats_csv, DistortionKind, DistortionSpec, ExternalEncoder, LadderConfig,
    LadderStatsRow,
};
use crate::eval::{evaluate, read_ground_truth, write_curve_csv, write_detections, AccuracyResult, Detection};
use crate::media::{Image, QualityStats, SequenceManifest};
use crate::quadrangle::{quadrangle, QuadrangleSpec, DEFAULT_HALF_WIDTH, DEFAULT_LAMBDA};
use crate::stability::{order_ladder, stability, LadderAccuracies, LadderEntry, StabilityVector, DEFAULT_OMEGA};
use crate::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;
pub const TOOLKIT_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const ACCURACY_FILE: &str = "accuracy.json";
pub const REPORT_FILE: &str = "report.json";

/// Accuracy of one detector on one sequence, tagged with where it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyRecord {
    pub detector_id: String,
    pub sequence_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent_id: Option<String>,
    /// `None` for the reference sequence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distortion: Option<DistortionSpec>,
    pub result: AccuracyResult,
}

impl AccuracyRecord {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Every `accuracy.json` below `dir`, in path order.
pub fn collect_accuracy_records(dir: &Path) -> Result<Vec<AccuracyRecord>> {
    let mut files = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).map_err(|e| Error::io(&d, e))? {
            let path = entry.map_err(|e| Error::io(&d, e))?.path();
            if path.is_dir() {
                stack.push(path);
            } else if path.file_name().is_some_and(|n| n == ACCURACY_FILE) {
                files.push(path);
            }
        }
    }
    files.sort();
    files.iter().map(|p| AccuracyRecord::read(p)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelReport {
    pub sequence_id: String,
    pub level: u32,
    pub param: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quality: Option<QualityStats>,
    pub a: f64,
    pub pd: f64,
    pub pm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KindSummary {
    pub s: f64,
    /// Levels in chain order (quality descending; dark then bright for `bv`).
    pub levels: Vec<LevelReport>,
}

/// Everything needed to audit one detector's stability: the accuracies,
/// the penalties derived from them and the resulting stability values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema: u32,
    pub toolkit_version: String,
    pub detector_id: String,
    pub reference_id: String,
    pub a_ref: f64,
    pub omega: f64,
    pub lambda: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_quality: Option<QualityStats>,
    pub per_kind: BTreeMap<DistortionKind, KindSummary>,
    /// Present when all four kinds were measured.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stability: Option<StabilityVector>,
    pub generated_at: String,
}

impl RunReport {
    /// Build one report per detector from its reference and distorted
    /// accuracy records. `stats` optionally attaches per-level quality.
    pub fn from_records(
        records: &[AccuracyRecord],
        stats: Option<&[LadderStatsRow]>,
        omega: f64,
        lambda: f64,
        generated_at: &str,
    ) -> Result<Vec<RunReport>> {
        if records.is_empty() {
            return Err(Error::Empty("no accuracy records".into()));
        }
        let mut by_detector: BTreeMap<&str, Vec<&AccuracyRecord>> = BTreeMap::new();
        for r in records {
            by_detector.entry(r.detector_id.as_str()).or_default().push(r);
        }
        by_detector
            .into_iter()
            .map(|(id, recs)| Self::for_detector(id, &recs, stats, omega, lambda, generated_at))
            .collect()
    }

    fn for_detector(
        detector_id: &str,
        records: &[&AccuracyRecord],
        stats: Option<&[LadderStatsRow]>,
        omega: f64,
        lambda: f64,
        generated_at: &str,
    ) -> Result<RunReport> {
        check_lambda(lambda)?;
        let refs: Vec<_> = records.iter().filter(|r| r.distortion.is_none()).collect();
        let reference = match refs.as_slice() {
            [r] => r,
            [] => return Err(Error::InvalidParam(format!("no reference accuracy for detector {detector_id}"))),
            _ => return Err(Error::InvalidParam(format!("several reference accuracies for detector {detector_id}"))),
        };
        let a_ref = reference.result.accuracy;

        let mut grouped: BTreeMap<DistortionKind, Vec<(&AccuracyRecord, &DistortionSpec)>> = BTreeMap::new();
        for r in records {
            if let Some(spec) = &r.distortion {
                if let Some(parent) = &r.parent_id {
                    if *parent != reference.sequence_id {
                        return Err(Error::InvalidParam(format!(
                            "{} derives from {parent}, not {}",
                            r.sequence_id, reference.sequence_id
                        )));
                    }
                }
                grouped.entry(spec.kind).or_default().push((r, spec));
            }
        }
        if grouped.is_empty() {
            return Err(Error::Empty(format!("no distorted accuracies for detector {detector_id}")));
        }

        let quality: HashMap<(Option<DistortionKind>, u32), QualityStats> = stats
            .unwrap_or_default()
            .iter()
            .map(|row| ((row.kind, row.level), row.stats.clone()))
            .collect();

        let mut per_kind = BTreeMap::new();
        for (kind, recs) in grouped {
            let entries: Vec<LadderEntry> = recs
                .iter()
                .map(|(r, spec)| LadderEntry { level: spec.level, param: spec.param, accuracy: r.result.accuracy })
                .collect();
            let ladder = order_ladder(kind, a_ref, &entries)?;
            let (s, breakdown) = stability(&ladder, omega)?;
            let ids: HashMap<u32, &str> = recs.iter().map(|(r, spec)| (spec.level, r.sequence_id.as_str())).collect();
            let levels = breakdown
                .levels
                .iter()
                .map(|l| LevelReport {
                    sequence_id: ids[&l.level].to_string(),
                    level: l.level,
                    param: l.param,
                    quality: quality.get(&(Some(kind), l.level)).cloned(),
                    a: l.a,
                    pd: l.pd,
                    pm: l.pm,
                })
                .collect();
            per_kind.insert(kind, KindSummary { s, levels });
        }

        let mut report = RunReport {
            schema: SCHEMA_VERSION,
            toolkit_version: TOOLKIT_VERSION.to_string(),
            detector_id: detector_id.to_string(),
            reference_id: reference.sequence_id.clone(),
            a_ref,
            omega,
            lambda,
            reference_quality: quality.get(&(None, 0)).cloned(),
            per_kind,
            stability: None,
            generated_at: generated_at.to_string(),
        };
        report.stability = report.full_vector();
        Ok(report)
    }

    fn full_vector(&self) -> Option<StabilityVector> {
        let mut v = [0.0; 4];
        for (slot, kind) in v.iter_mut().zip(DistortionKind::ALL) {
            *slot = self.per_kind.get(&kind)?.s;
        }
        Some(StabilityVector::from_array(v))
    }

    /// The embedded accuracies as chains, ready for re-computation.
    pub fn ladders(&self) -> Result<Vec<LadderAccuracies>> {
        self.per_kind
            .iter()
            .map(|(&kind, summary)| {
                let entries: Vec<_> = summary
                    .levels
                    .iter()
                    .map(|l| LadderEntry { level: l.level, param: l.param, accuracy: l.a })
                    .collect();
                order_ladder(kind, self.a_ref, &entries)
            })
            .collect()
    }

    /// Recompute every penalty and stability value from the embedded
    /// accuracies and check they match what the report states.
    pub fn verify(&self) -> Result<()> {
        if self.schema != SCHEMA_VERSION {
            return Err(Error::InvalidParam(format!("unsupported report schema {}", self.schema)));
        }
        for ladder in self.ladders()? {
            let summary = &self.per_kind[&ladder.kind];
            let (s, breakdown) = stability(&ladder, self.omega)?;
            let same_levels = breakdown.levels.len() == summary.levels.len()
                && breakdown
                    .levels
                    .iter()
                    .zip(&summary.levels)
                    .all(|(b, l)| b.level == l.level && b.pd == l.pd && b.pm == l.pm);
            if s != summary.s || !same_levels {
                return Err(Error::Data(format!(
                    "{} stability of {} does not match its accuracies",
                    ladder.kind, self.detector_id
                )));
            }
        }
        if self.stability != self.full_vector() {
            return Err(Error::Data("stability vector does not match per-kind values".into()));
        }
        Ok(())
    }

    pub fn quadrangle(&self, half_width: f64) -> Result<QuadrangleSpec> {
        let s = self.stability.ok_or_else(|| {
            Error::InvalidParam(format!("{} lacks some distortion kinds; no quadrangle", self.detector_id))
        })?;
        quadrangle(&self.detector_id, self.a_ref, s, self.lambda, half_width)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let report: RunReport = serde_json::from_str(&text)?;
        report.verify()?;
        Ok(report)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    /// JSON text with the timestamp blanked, for reproducibility checks.
    pub fn canonical_json(&self) -> Result<String> {
        let mut copy = self.clone();
        copy.generated_at.clear();
        Ok(serde_json::to_string_pretty(&copy)?)
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda.is_finite() && lambda >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParam(format!("lambda = {lambda} must be finite and ≥ 0")))
    }
}

/// Run the detector on every frame. Frames smaller than the detection window
/// yield no detections.
pub fn detect_frames(model: &DetectorModel, frames: &[Image]) -> Result<Vec<Detection>> {
    let per_frame = frames
        .par_iter()
        .enumerate()
        .map(|(i, f)| match model.detect_frame(f, i as u32) {
            Err(Error::FrameTooSmall { width, height, .. }) => {
                log::debug!("frame {i} is {width}x{height}, below the detection window");
                Ok(Vec::new())
            }
            other => other,
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_frame.into_iter().flatten().collect())
}

/// Detect on a sequence, evaluate against its ground truth and write
/// `detections.csv`, `curve.csv` and `accuracy.json` into `dir`.
pub fn evaluate_sequence(model: &DetectorModel, manifest: &SequenceManifest, dir: &Path) -> Result<AccuracyRecord> {
    let gt_path = manifest
        .ground_truth
        .as_deref()
        .ok_or_else(|| Error::Manifest(format!("{} has no ground truth", manifest.sequence_id)))?;
    let gts = read_ground_truth(gt_path)?;
    let frames = manifest.load_frames()?;
    let dts = detect_frames(model, &frames)?;
    write_detections(&dir.join("detections.csv"), &dts)?;
    let result = evaluate(&dts, &gts)?;
    write_curve_csv(&dir.join("curve.csv"), &result.curve)?;
    let record = AccuracyRecord {
        detector_id: model.detector_id.clone(),
        sequence_id: manifest.sequence_id.clone(),
        parent_id: manifest.parent_id.clone(),
        distortion: manifest.distortion,
        result,
    };
    record.write(&dir.join(ACCURACY_FILE))?;
    Ok(record)
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub scene: SceneConfig,
    pub ladder: LadderConfig,
    pub kinds: Vec<DistortionKind>,
    pub omega: f64,
    pub lambda: f64,
    /// Worker threads; 0 uses every available core.
    pub jobs: usize,
    /// Detector to evaluate; trained on a companion scene when absent.
    pub model: Option<DetectorModel>,
    pub encoder: Option<ExternalEncoder>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            scene: SceneConfig::default(),
            ladder: LadderConfig::default(),
            kinds: DistortionKind::ALL.to_vec(),
            omega: DEFAULT_OMEGA,
            lambda: DEFAULT_LAMBDA,
            jobs: 0,
            model: None,
            encoder: None,
        }
    }
}

/// Output locations of a run below its root directory.
#[derive(Debug, Clone)]
pub struct RunLayout {
    pub root: PathBuf,
}

impl RunLayout {
    pub fn reference_dir(&self) -> PathBuf {
        self.root.join("reference")
    }
    pub fn ladder_dir(&self) -> PathBuf {
        self.root.join("ladders")
    }
    pub fn model_path(&self) -> PathBuf {
        self.root.join("model.json")
    }
    pub fn stats_path(&self) -> PathBuf {
        self.root.join("stats.csv")
    }
    pub fn report_path(&self) -> PathBuf {
        self.root.join(REPORT_FILE)
    }
    pub fn chart_path(&self) -> PathBuf {
        self.root.join("quadrangle.svg")
    }
}

/// Full robustness run into `out_dir`. Returns the report, which is also
/// written to `report.json` together with every intermediate artifact.
pub fn run(cfg: &RunConfig, out_dir: &Path, generated_at: &str) -> Result<RunReport> {
    if !(0.0..=1.0).contains(&cfg.omega) {
        return Err(Error::InvalidParam(format!("omega = {} outside [0, 1]", cfg.omega)));
    }
    check_lambda(cfg.lambda)?;
    if cfg.kinds.is_empty() {
        return Err(Error::InvalidParam("no distortion kinds selected".into()));
    }
    cfg.ladder.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| Error::InvalidParam(format!("thread pool: {e}")))?;
    pool.install(|| run_inner(cfg, out_dir, generated_at))
}

fn run_inner(cfg: &RunConfig, out_dir: &Path, generated_at: &str) -> Result<RunReport> {
    let layout = RunLayout { root: out_dir.to_path_buf() };
    let ref_dir = layout.reference_dir();
    let (reference, _) = synth_scene(&cfg.scene, &ref_dir)?;
    log::info!("reference {} written to {}", reference.sequence_id, ref_dir.display());

    let model = match &cfg.model {
        Some(m) => {
            m.validate()?;
            m.clone()
        }
        None => DetectorModel::train_on_synthetic(&cfg.scene)?,
    };
    model.write(&layout.model_path())?;

    let mut records = vec![evaluate_sequence(&model, &reference, &ref_dir)?];
    let mut manifests = Vec::new();
    for &kind in &cfg.kinds {
        let ladder = build_ladder_with(&reference, kind, &cfg.ladder, &layout.ladder_dir(), cfg.encoder.as_ref())?;
        for m in &ladder {
            let dir = layout.ladder_dir().join(&m.sequence_id);
            records.push(evaluate_sequence(&model, m, &dir)?);
            log::info!("{}: accuracy {:.4}", m.sequence_id, records.last().map_or(0.0, |r| r.result.accuracy));
        }
        manifests.extend(ladder);
    }
    let stats = ladder_stats(&reference, &manifests)?;
    write_stats_csv(&layout.stats_path(), &stats)?;

    let report = RunReport::from_records(&records, Some(&stats), cfg.omega, cfg.lambda, generated_at)?
        .pop()
        .expect("one detector per run");
    report.write(&layout.report_path())?;
    if report.stability.is_some() {
        let chart = crate::quadrangle::ChartConfig { lambda: cfg.lambda, ..Default::default() };
        crate::quadrangle::render_chart(&[report.quadrangle(DEFAULT_HALF_WIDTH)?], &chart, &layout.chart_path())?;
    }
    Ok(report)
}
