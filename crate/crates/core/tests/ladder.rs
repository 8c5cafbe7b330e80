use std::fs;
use std::path::Path;

use robench::detector::{synth_scene, SceneConfig};
use robench::distortion::{build_ladder_with, ladder_stats, DistortionKind, LadderConfig};
use robench::eval::read_ground_truth;
use robench::media::{SequenceManifest, SequenceRole};

fn small_scene(dir: &Path) -> SequenceManifest {
    let cfg = SceneConfig { width: 96, height: 80, frames: 3, actor_count: 1, actor_height: 40, actor_width: 20, ..SceneConfig::default() };
    synth_scene(&cfg, &dir.join("reference")).unwrap().0
}

fn count_manifests(dir: &Path) -> usize {
    fs::read_dir(dir)
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.path().join("manifest.json").is_file())
        .count()
}

#[test]
fn full_ladder_writes_one_readable_manifest_per_level() {
    let tmp = tempfile::tempdir().unwrap();
    let reference = small_scene(tmp.path());
    let out = tmp.path().join("ladders");
    let cfg = LadderConfig::default();
    let mut total = 0;
    for kind in DistortionKind::ALL {
        let manifests = build_ladder_with(&reference, kind, &cfg, &out, None).unwrap();
        assert_eq!(manifests.len(), cfg.params(kind).len());
        for (i, m) in manifests.iter().enumerate() {
            assert_eq!(m.role, SequenceRole::Distorted);
            assert_eq!(m.parent_id.as_deref(), Some(reference.sequence_id.as_str()));
            let spec = m.distortion.as_ref().unwrap();
            assert_eq!((spec.kind, spec.level), (kind, i as u32 + 1));
            let back = SequenceManifest::read(&out.join(&m.sequence_id).join("manifest.json")).unwrap();
            assert_eq!(&back, m);
            assert_eq!(back.load_frames().unwrap().len(), 3);
        }
        total += manifests.len();
    }
    assert_eq!(total, 52);
    assert_eq!(count_manifests(&out), 52);
}

#[test]
fn resolution_ladder_scales_ground_truth() {
    let tmp = tempfile::tempdir().unwrap();
    let reference = small_scene(tmp.path());
    let ref_gt = read_ground_truth(reference.ground_truth.as_ref().unwrap()).unwrap();
    let cfg = LadderConfig { res_scales: vec![0.5], ..LadderConfig::default() };
    let m = &build_ladder_with(&reference, DistortionKind::Res, &cfg, tmp.path(), None).unwrap()[0];
    let frames = m.load_frames().unwrap();
    assert_eq!((frames[0].width(), frames[0].height()), (48, 40));
    let gt = read_ground_truth(m.ground_truth.as_ref().unwrap()).unwrap();
    assert_eq!(gt.len(), ref_gt.len());
    for (a, b) in gt.iter().zip(&ref_gt) {
        for (x, y) in a.boxes.iter().zip(&b.boxes) {
            assert!((x.w - y.w * 0.5).abs() < 1e-9 && (x.h - y.h * 0.5).abs() < 1e-9);
        }
    }
}

#[test]
fn stats_follow_each_distortion() {
    let tmp = tempfile::tempdir().unwrap();
    let reference = small_scene(tmp.path());
    let cfg = LadderConfig::default();
    let mut ladders = Vec::new();
    for kind in DistortionKind::ALL {
        ladders.extend(build_ladder_with(&reference, kind, &cfg, tmp.path(), None).unwrap());
    }
    let rows = ladder_stats(&reference, &ladders).unwrap();
    assert_eq!(rows.len(), 53);
    assert!(rows[0].kind.is_none() && rows[0].stats.psnr_db.is_infinite());

    let of = |k| rows.iter().filter(move |r| r.kind == Some(k));
    let qp: Vec<_> = of(DistortionKind::Qp).collect();
    for w in qp.windows(2) {
        assert!(w[1].stats.psnr_db <= w[0].stats.psnr_db);
        assert!(w[1].stats.encoded_bytes <= w[0].stats.encoded_bytes);
    }
    let res: Vec<_> = of(DistortionKind::Res).collect();
    // the last levels of a 96x80 scene are a few pixels wide, where coder overhead dominates
    for w in res[..7].windows(2) {
        assert!(w[1].stats.compression_ratio >= w[0].stats.compression_ratio);
    }
    let wn: Vec<_> = of(DistortionKind::Wn).collect();
    assert!(wn.first().unwrap().stats.psnr_db > wn.last().unwrap().stats.psnr_db);
    for r in of(DistortionKind::Bv) {
        let brighter = r.stats.mean_luma > rows[0].stats.mean_luma;
        assert_eq!(brighter, r.param > 0.0, "bv {}", r.param);
    }
}

#[test]
fn non_reference_input_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let reference = small_scene(tmp.path());
    let cfg = LadderConfig { bv_offsets: vec![0.1], ..LadderConfig::default() };
    let distorted = build_ladder_with(&reference, DistortionKind::Bv, &cfg, tmp.path(), None).unwrap();
    assert!(build_ladder_with(&distorted[0], DistortionKind::Bv, &cfg, tmp.path(), None).is_err());
}
