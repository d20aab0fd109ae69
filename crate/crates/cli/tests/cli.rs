use std::path::Path;
use std::sync::Arc;

use image::{Rgb, RgbImage};
use vinecut_cli::bench::{bench, load_grid, BenchArgs};
use vinecut_cli::overlay::{class_color, ORPHAN, POINT};
use vinecut_cli::run::{output_paths, run, EXIT_FATAL, EXIT_OK, EXIT_WARNINGS};
use vinecut_cli::synth::{write_scene, ANNOTATIONS_FILE, CONFIG_FILE, DEPTH_FILE};
use vinecut_cli::{cmd_bench, cmd_run, render_overlay, RunArgs};
use vinecut_core::instance::rect_ring;
use vinecut_core::model::Scene;
use vinecut_core::pruning::PointFlag;
use vinecut_core::synthetic::{generate_scene, perturb, PerturbOp, SceneSpec};
use vinecut_core::*;

fn run_args(scene: &Path, out: &Path) -> RunArgs {
    RunArgs {
        annotations: scene.join(ANNOTATIONS_FILE),
        depth: Some(scene.join(DEPTH_FILE)),
        config: Some(scene.join(CONFIG_FILE)),
        out: out.to_path_buf(),
        ..RunArgs::default()
    }
}

#[test]
fn synthetic_scene_runs_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    write_scene(&SceneSpec::five_spurs(0), &dir.path().join("scene")).unwrap();
    let out = dir.path().join("out");
    assert_eq!(cmd_run(&run_args(&dir.path().join("scene"), &out)), EXIT_OK);
    for p in output_paths(&out) {
        assert!(p.is_file(), "{} missing", p.display());
    }
    let overlay = image::open(out.join("overlay.png")).unwrap();
    assert_eq!((overlay.width(), overlay.height()), (640, 480));
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.join("manifest.json")).unwrap()).unwrap();
    for f in manifest["outputs"].as_array().unwrap() {
        assert!(out.join(f.as_str().unwrap()).is_file());
    }
    assert_eq!(manifest["counts"]["regions"], 5);
    assert_eq!(manifest["config_sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn no_overlay_skips_the_image() {
    let dir = tempfile::tempdir().unwrap();
    write_scene(&SceneSpec::five_spurs(0), dir.path()).unwrap();
    let out = dir.path().join("out");
    let args = RunArgs { no_overlay: true, ..run_args(dir.path(), &out) };
    assert_eq!(cmd_run(&args), EXIT_OK);
    assert!(!out.join("overlay.png").exists());
}

#[test]
fn missing_cordon_is_fatal() {
    let dir = tempfile::tempdir().unwrap();
    write_scene(&SceneSpec::five_spurs(0), dir.path()).unwrap();
    let b = generate_scene(&SceneSpec::five_spurs(0)).unwrap();
    let canes: Vec<_> = b.records.iter().filter(|r| r.organ_class != OrganClass::MainCordon).cloned().collect();
    std::fs::write(dir.path().join(ANNOTATIONS_FILE), to_coco_json(&canes, 640, 480, "x.png").unwrap()).unwrap();
    let args = run_args(dir.path(), &dir.path().join("out"));
    assert_eq!(cmd_run(&args), EXIT_FATAL);
    let err = run(&args).unwrap_err();
    assert!(format!("{err:#}").contains("no main cordon"), "{err:#}");
}

#[test]
fn missing_camera_is_fatal() {
    let dir = tempfile::tempdir().unwrap();
    write_scene(&SceneSpec::five_spurs(0), dir.path()).unwrap();
    std::fs::write(dir.path().join(CONFIG_FILE), "").unwrap();
    assert_eq!(cmd_run(&run_args(dir.path(), &dir.path().join("out"))), EXIT_FATAL);
}

/// Erase the cane and blank the depth around the first expected spur point,
/// so nothing within the correction radius can take it.
#[test]
fn unplaceable_point_gives_warning_exit() {
    let spec = SceneSpec::five_spurs(0);
    let clean = generate_scene(&spec).unwrap();
    let target = clean.truth_points[0].clone();
    let (px, py) = (target.position.x.round() as u32, target.position.y.round() as u32);
    let cane = &clean.records[target.target_item_id];
    let half = 12;
    let at = ((py - half - cane.bbox.y0) as f64 + 0.5) / cane.bbox.height() as f64;
    let mut b =
        perturb(&clean, &[PerturbOp::EraseBand { instance: target.target_item_id, at, width_px: 2 * half + 1 }], 0);
    let mut depth = (*b.depth).clone();
    for y in py - half..=py + half {
        for x in px - half..=px + half {
            depth.set(x, y, 0);
        }
    }
    b.depth = Arc::new(depth);

    let dir = tempfile::tempdir().unwrap();
    write_scene(&spec, dir.path()).unwrap();
    std::fs::write(dir.path().join(ANNOTATIONS_FILE), b.to_coco_json().unwrap()).unwrap();
    std::fs::write(dir.path().join(DEPTH_FILE), b.depth_png().unwrap()).unwrap();
    let out = dir.path().join("out");
    assert_eq!(cmd_run(&run_args(dir.path(), &out)), EXIT_WARNINGS);
    let doc: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.join("pruning_points.json")).unwrap()).unwrap();
    let failed: Vec<_> = doc["pruning_points"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|p| p["flags"].as_array().unwrap().iter().any(|f| f == "correction_failed"))
        .collect();
    assert_eq!(failed.len(), 1);
    assert_eq!(failed[0]["target_item_id"], target.target_item_id);
}

#[test]
fn constant_depth_replaces_the_depth_image() {
    let dir = tempfile::tempdir().unwrap();
    write_scene(&SceneSpec::five_spurs(0), dir.path()).unwrap();
    let args = RunArgs { depth: None, constant_depth_m: Some(1.0), ..run_args(dir.path(), &dir.path().join("out")) };
    assert_eq!(cmd_run(&args), EXIT_OK);
    let both = RunArgs { constant_depth_m: Some(1.0), ..run_args(dir.path(), &dir.path().join("out2")) };
    assert_eq!(cmd_run(&both), EXIT_FATAL);
}

fn empty_model(w: u32, h: u32) -> PlantModel {
    PlantModel {
        items: Vec::new(),
        roots: Vec::new(),
        orphans: Vec::new(),
        scene: Scene {
            width: w,
            height: h,
            intrinsics: CameraIntrinsics {
                fx: 500.0,
                fy: 500.0,
                cx: w as f64 / 2.0,
                cy: h as f64 / 2.0,
                depth_scale: 0.001,
            },
            depth: Arc::new(DepthImage::filled(w, h, 1000)),
        },
    }
}

#[test]
fn empty_model_leaves_canvas_untouched() {
    let canvas = RgbImage::from_fn(40, 30, |x, y| Rgb([x as u8, y as u8, 7]));
    assert_eq!(render_overlay(canvas.clone(), &empty_model(40, 30), &[]), canvas);
}

#[test]
fn point_marker_is_red_at_its_pixel() {
    let point = PruningPoint {
        position_px: Pixel::new(17, 11),
        position_3d: None,
        angle_rad: 0.0,
        cut: CutType::SpurCut,
        region_id: 0,
        target_item_id: 0,
        corrected: false,
        flags: vec![PointFlag::MissingDepth],
    };
    let img = render_overlay(RgbImage::new(40, 30), &empty_model(40, 30), &[point]);
    assert_eq!(*img.get_pixel(17, 11), POINT);
    // The tick runs along the cut orientation, here horizontal.
    assert_eq!(*img.get_pixel(17 + 8, 11), POINT);
    assert_eq!(*img.get_pixel(17, 11 + 8), Rgb([0, 0, 0]));
}

#[test]
fn orphans_use_the_warning_color() {
    let rect = |id, class, r: BBox| InstanceRecord::from_polygons(id, class, vec![rect_ring(r)], 200, 200).unwrap();
    let records = vec![
        rect(0, OrganClass::MainCordon, BBox::new(0, 100, 199, 119)),
        rect(1, OrganClass::Cane, BBox::new(50, 10, 56, 60)),
    ];
    let depth = Arc::new(DepthImage::filled(200, 200, 1000));
    let cam = CameraIntrinsics { fx: 500.0, fy: 500.0, cx: 100.0, cy: 100.0, depth_scale: 0.001 };
    let m = assemble_model(&records, depth, &cam, &PipelineConfig::default()).unwrap();
    assert_eq!(m.orphans, vec![1]);
    let img = render_overlay(RgbImage::new(200, 200), &m, &[]);
    let tint = |c: Rgb<u8>| Rgb(c.0.map(|v| (v as f32 * 0.6).round() as u8));
    assert_eq!(*img.get_pixel(53, 30), tint(ORPHAN));
    assert_eq!(*img.get_pixel(150, 110), tint(class_color(OrganClass::MainCordon)));
}

fn write_grid(dir: &Path, text: &str) -> std::path::PathBuf {
    let p = dir.join("grid.json");
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn empty_grid_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let grid = write_grid(dir.path(), r#"{"cells": []}"#);
    let args = BenchArgs { grid, out: dir.path().join("out"), jobs: None };
    assert_eq!(cmd_bench(&args), EXIT_FATAL);
}

#[test]
fn bad_grids_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    for text in [
        r#"{"cells": [{"name": "a", "seeds": []}]}"#,
        r#"{"cells": [{"name": "../up", "seeds": [1]}]}"#,
        r#"{"cells": [{"name": "a", "seeds": [1]}, {"name": "a", "seeds": [2]}]}"#,
        r#"{"cells": [{"name": "a", "seeds": [1], "surprise": 1}]}"#,
    ] {
        assert!(load_grid(&write_grid(dir.path(), text)).is_err(), "{text}");
    }
}

#[test]
fn occlusion_lowers_recall_without_failing() {
    let dir = tempfile::tempdir().unwrap();
    let grid = write_grid(
        dir.path(),
        r#"{"cells": [
            {"name": "clean", "seeds": {"start": 0, "end": 12}},
            {"name": "occluded", "seeds": {"start": 0, "end": 12},
             "ops": [{"op": "occlude", "fraction": 0.3, "width_px": 6}]},
            {"name": "tight", "seeds": [0, 1], "generator": "five_spurs", "config": {"correction_max_radius": 3}}
        ]}"#,
    );
    let args = BenchArgs { grid, out: dir.path().join("out"), jobs: Some(2) };
    let summaries = bench(&args).unwrap();
    assert_eq!(summaries[0].isomorphic, 12);
    assert!(summaries[1].edge_recall < 1.0);
    assert!(summaries.iter().all(|s| s.failed == 0));
    assert_eq!(cmd_bench(&args), EXIT_OK);
    let summary = std::fs::read_to_string(dir.path().join("out/summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 4);
    let scenes = std::fs::read_to_string(dir.path().join("out/occluded/scenes.csv")).unwrap();
    assert_eq!(scenes.lines().count(), 13);
    assert!(scenes.lines().next().unwrap().contains("edge_recall"));
}
