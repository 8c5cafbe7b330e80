use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use robench::detector::{synth_scene, DetectorModel, SceneConfig};
use robench::distortion::{build_ladder_with, ladder_stats, write_stats_csv, ExternalEncoder, LadderConfig};
use robench::eval::{evaluate, read_detections, read_ground_truth, write_curve_csv, write_detections};
use robench::media::SequenceManifest;
use robench::pipeline::{collect_accuracy_records, detect_frames, AccuracyRecord, RunConfig, RunReport};
use robench::quadrangle::{rank_by_stability, render_chart, write_ranking_csv, ChartConfig};
use robench::{Error, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::{DetectArgs, DistortArgs, EvalArgs, ReportArgs, RunArgs, StabilityArgs, SynthArgs, TrainArgs};

fn read_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Error::Io { path: p.to_path_buf(), source: e })?;
            Ok(serde_json::from_str(&text)?)
        }
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Io { path: dir.to_path_buf(), source: e })
}

/// Write pretty JSON to `out`, or to standard output.
fn emit_json<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    match out {
        Some(p) => fs::write(p, text).map_err(|e| Error::Io { path: p.to_path_buf(), source: e }),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Error::Io { path: PathBuf::from("<stdout>"), source: e }),
    }
}

fn check_omega(omega: f64) -> Result<()> {
    if (0.0..=1.0).contains(&omega) {
        Ok(())
    } else {
        Err(Error::InvalidParam(format!("--omega {omega} outside [0, 1]")))
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda.is_finite() && lambda >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParam(format!("--lambda {lambda} must be ≥ 0")))
    }
}

fn with_pool<T: Send>(jobs: usize, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::InvalidParam(format!("thread pool: {e}")))?
        .install(f)
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

pub fn synth(a: SynthArgs) -> Result<()> {
    let mut cfg: SceneConfig = read_config(a.config.as_deref())?;
    if let Some(seed) = a.seed {
        cfg.texture_seed = seed;
    }
    let (manifest, _) = synth_scene(&cfg, &a.out)?;
    println!("{}", a.out.join("manifest.json").display());
    log::info!("{} frames of {}", manifest.frame_paths.len(), manifest.sequence_id);
    Ok(())
}

pub fn distort(a: DistortArgs) -> Result<()> {
    let mut cfg: LadderConfig = read_config(a.config.as_deref())?;
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    let reference = SequenceManifest::read(&a.reference)?;
    let kinds: BTreeSet<_> = a.kinds.iter().copied().collect();
    let encoder = ExternalEncoder::from_env();
    with_pool(a.jobs, || {
        create_dir(&a.out)?;
        let mut manifests = Vec::new();
        for kind in kinds {
            manifests.extend(build_ladder_with(&reference, kind, &cfg, &a.out, encoder.as_ref())?);
        }
        let stats = ladder_stats(&reference, &manifests)?;
        write_stats_csv(&a.out.join("stats.csv"), &stats)?;
        println!("{} distorted sequences", manifests.len());
        Ok(())
    })
}

pub fn eval(a: EvalArgs) -> Result<()> {
    let dts = read_detections(&a.detections)?;
    let gts = read_ground_truth(&a.gt)?;
    let result = evaluate(&dts, &gts)?;
    if let Some(p) = &a.curve_out {
        write_curve_csv(p, &result.curve)?;
    }
    match &a.manifest {
        Some(m) => {
            let manifest = SequenceManifest::read(m)?;
            let record = AccuracyRecord {
                detector_id: a.detector_id,
                sequence_id: manifest.sequence_id,
                parent_id: manifest.parent_id,
                distortion: manifest.distortion,
                result,
            };
            emit_json(&record, a.out.as_deref())
        }
        None => emit_json(&result, a.out.as_deref()),
    }
}

fn gather_records(inputs: &[PathBuf]) -> Result<Vec<AccuracyRecord>> {
    let mut records = Vec::new();
    for input in inputs {
        if input.is_dir() {
            records.extend(collect_accuracy_records(input)?);
        } else {
            records.push(AccuracyRecord::read(input)?);
        }
    }
    Ok(records)
}

fn chart(reports: &[RunReport], lambda: f64, half_width: f64, path: &Path) -> Result<()> {
    let quads = reports
        .iter()
        .filter(|r| r.stability.is_some())
        .map(|r| {
            let mut r = r.clone();
            r.lambda = lambda;
            r.quadrangle(half_width)
        })
        .collect::<Result<Vec<_>>>()?;
    if quads.is_empty() {
        return Err(Error::InvalidParam("the chart needs all four distortion kinds".into()));
    }
    render_chart(&quads, &ChartConfig { lambda, ..ChartConfig::default() }, path)
}

pub fn stability(a: StabilityArgs) -> Result<()> {
    check_omega(a.omega)?;
    check_lambda(a.lambda)?;
    let records = gather_records(&a.inputs)?;
    let reports = RunReport::from_records(&records, None, a.omega, a.lambda, &now())?;
    if let Some(svg) = &a.svg_out {
        chart(&reports, a.lambda, a.half_width, svg)?;
    }
    match reports.as_slice() {
        [one] => emit_json(one, a.out.as_deref()),
        many => emit_json(&many, a.out.as_deref()),
    }
}

pub fn report(a: ReportArgs) -> Result<()> {
    let reports = a.reports.iter().map(|p| RunReport::read(p)).collect::<Result<Vec<_>>>()?;
    let mut ids = BTreeSet::new();
    for r in &reports {
        if !ids.insert(r.detector_id.as_str()) {
            return Err(Error::InvalidParam(format!("detector id {:?} appears in more than one report", r.detector_id)));
        }
    }
    let results = reports
        .iter()
        .map(|r| {
            r.stability
                .map(|s| (r.detector_id.clone(), s))
                .ok_or_else(|| Error::InvalidParam(format!("report for {} lacks some distortion kinds", r.detector_id)))
        })
        .collect::<Result<Vec<_>>>()?;
    create_dir(&a.out_dir)?;
    let rows = rank_by_stability(&results)?;
    write_ranking_csv(&rows, &a.out_dir.join("ranking.csv"))?;
    for kind in robench::distortion::DistortionKind::ALL {
        let per_kind: Vec<_> = rows.iter().filter(|r| r.kind == kind).cloned().collect();
        write_ranking_csv(&per_kind, &a.out_dir.join(format!("ranking_{kind}.csv")))?;
    }
    let lambda = a.lambda.unwrap_or(reports[0].lambda);
    check_lambda(lambda)?;
    chart(&reports, lambda, a.half_width, &a.out_dir.join("quadrangles.svg"))?;
    println!("{}", a.out_dir.join("ranking.csv").display());
    Ok(())
}

pub fn train(a: TrainArgs) -> Result<()> {
    let mut cfg: SceneConfig = read_config(a.config.as_deref())?;
    if let Some(seed) = a.seed {
        cfg.texture_seed = seed;
    }
    DetectorModel::train_on_synthetic(&cfg)?.write(&a.out)
}

pub fn detect(a: DetectArgs) -> Result<()> {
    let model = DetectorModel::read(&a.model)?;
    let manifest = SequenceManifest::read(&a.manifest)?;
    let frames = manifest.load_frames()?;
    let dts = with_pool(a.jobs, || detect_frames(&model, &frames))?;
    write_detections(&a.out, &dts)
}

/// Sections of a run configuration file.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RunFile {
    scene: SceneConfig,
    ladder: LadderConfig,
}

pub fn run(a: RunArgs) -> Result<()> {
    check_omega(a.omega)?;
    check_lambda(a.lambda)?;
    let mut file: RunFile = read_config(a.config.as_deref())?;
    if let Some(seed) = a.seed {
        file.scene.texture_seed = seed;
        file.ladder.seed = seed;
    }
    let model = a.model.as_deref().map(DetectorModel::read).transpose()?;
    let cfg = RunConfig {
        scene: file.scene,
        ladder: file.ladder,
        kinds: a.kinds.iter().copied().collect::<BTreeSet<_>>().into_iter().collect(),
        omega: a.omega,
        lambda: a.lambda,
        jobs: a.jobs,
        model,
        encoder: ExternalEncoder::from_env(),
    };
    create_dir(&a.out)?;
    let report = robench::pipeline::run(&cfg, &a.out, &now())?;
    println!("{}", a.out.join(robench::pipeline::REPORT_FILE).display());
    if let Some(s) = report.stability {
        println!(
            "a_ref {:.4}  S = [qp {:.4}, res {:.4}, wn {:.4}, bv {:.4}]",
            report.a_ref, s.s_qp, s.s_res, s.s_wn, s.s_bv
        );
    }
    Ok(())
}
