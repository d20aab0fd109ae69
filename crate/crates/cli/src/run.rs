//! The `run` command: one annotated scene through the whole pipeline.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use image::RgbImage;
use serde::Serialize;
use vinecut_core::assess::AssessmentFlag;
use vinecut_core::pruning::PointFlag;
use vinecut_core::*;

use crate::output::{sha256_hex, write_atomic};
use crate::overlay::render_overlay;

pub const MODEL_FILE: &str = "model.json";
pub const POINTS_FILE: &str = "pruning_points.json";
pub const OVERLAY_FILE: &str = "overlay.png";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Exit codes shared by every subcommand.
pub const EXIT_OK: i32 = 0;
pub const EXIT_FATAL: i32 = 1;
pub const EXIT_WARNINGS: i32 = 2;

#[derive(Debug, Clone, Default)]
pub struct RunArgs {
    pub annotations: PathBuf,
    /// 16-bit depth PNG. Exactly one of `depth` and `constant_depth_m` is set.
    pub depth: Option<PathBuf>,
    /// Uniform scene depth in meters, for annotations without a depth map.
    pub constant_depth_m: Option<f64>,
    pub config: Option<PathBuf>,
    pub out: PathBuf,
    pub no_overlay: bool,
    /// Image to select in a multi-image annotation file, by ID or file name.
    pub image_id: Option<String>,
    /// PNG drawn under the overlay; a black canvas otherwise.
    pub image: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub inputs: BTreeMap<String, Option<String>>,
    pub out_dir: String,
    pub config_sha256: String,
    pub outputs: Vec<String>,
    pub timings_ms: BTreeMap<String, f64>,
    pub counts: RunCounts,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct RunCounts {
    pub instances: usize,
    pub orphans: usize,
    pub regions: usize,
    pub points: usize,
    pub point_flags: BTreeMap<String, usize>,
    pub assessment_flags: BTreeMap<String, usize>,
    /// Degradations that turn the exit code into 2.
    pub warnings: usize,
}

/// Point flags that mean a point may be unusable.
const WARNING_POINT_FLAGS: [PointFlag; 3] =
    [PointFlag::CorrectionFailed, PointFlag::MissingDepth, PointFlag::DegenerateSegment];
/// Assessment flags that mean an assessment rests on missing data.
const WARNING_ASSESSMENT_FLAGS: [AssessmentFlag; 4] = [
    AssessmentFlag::CordonColumnOutside,
    AssessmentFlag::CordonColumnOccluded,
    AssessmentFlag::VigorUnknown,
    AssessmentFlag::OriginMissing3d,
];

fn flag_name<T: Serialize>(flag: &T) -> String {
    serde_json::to_value(flag).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default()
}

fn display(p: &Option<PathBuf>) -> Option<String> {
    p.as_ref().map(|p| p.display().to_string())
}

/// Run the pipeline and map the outcome to the exit-code contract, reporting
/// fatal errors on standard error.
pub fn cmd_run(args: &RunArgs) -> i32 {
    match run(args) {
        Ok(m) if m.counts.warnings > 0 => {
            log::warn!("{} warning(s); see {}", m.counts.warnings, args.out.join(MANIFEST_FILE).display());
            EXIT_WARNINGS
        }
        Ok(_) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_FATAL
        }
    }
}

pub fn run(args: &RunArgs) -> Result<RunManifest> {
    let mut timings = BTreeMap::new();
    let mut lap = {
        let mut t = Instant::now();
        move |name: &str, timings: &mut BTreeMap<String, f64>| {
            timings.insert(name.to_string(), t.elapsed().as_secs_f64() * 1e3);
            t = Instant::now();
        }
    };

    let cfg = match &args.config {
        Some(p) => load_config(p).with_context(|| format!("loading config {}", p.display()))?,
        None => PipelineConfig::default(),
    };
    let Some(cam) = cfg.camera else {
        bail!("config has no camera intrinsics; set camera.fx, camera.fy, camera.cx, camera.cy and camera.depth_scale");
    };
    let bytes = std::fs::read(&args.annotations).with_context(|| format!("reading {}", args.annotations.display()))?;
    let scene = parse_annotations(&bytes, &ClassMap::default(), args.image_id.as_deref())
        .with_context(|| format!("parsing annotations {}", args.annotations.display()))?;
    let (w, h) = scene.dimensions();
    let depth = match (&args.depth, args.constant_depth_m) {
        (Some(p), None) => load_depth(p, Some((w, h))).with_context(|| format!("loading depth {}", p.display()))?,
        (None, Some(m)) => {
            let units = m / cam.depth_scale;
            if !(units >= 1.0 && units <= u16::MAX as f64) {
                bail!("constant depth {m} m is not representable with depth_scale {}", cam.depth_scale);
            }
            DepthImage::filled(w, h, units.round() as u16)
        }
        _ => bail!("give exactly one of a depth image or a constant depth"),
    };
    let canvas = match &args.image {
        Some(p) if !args.no_overlay => {
            let img = image::open(p).with_context(|| format!("reading image {}", p.display()))?.to_rgb8();
            if img.dimensions() != (w, h) {
                bail!("{}: image is {}x{}, annotations are {w}x{h}", p.display(), img.width(), img.height());
            }
            img
        }
        _ => RgbImage::new(w, h),
    };
    lap("ingest", &mut timings);

    let model = assemble_model(&scene.records, Arc::new(depth), &cam, &cfg)
        .with_context(|| format!("modelling {}", args.annotations.display()))?;
    lap("model", &mut timings);
    let assessed = assess_all(&model, &cfg, Execution::default());
    lap("assess", &mut timings);
    let points = generate_pruning_points(&model, &assessed, &cfg);
    lap("points", &mut timings);

    let mut counts = RunCounts {
        instances: scene.records.len(),
        orphans: model.orphans.len(),
        regions: assessed.len(),
        points: points.len(),
        ..RunCounts::default()
    };
    for p in &points {
        for f in &p.flags {
            *counts.point_flags.entry(flag_name(f)).or_default() += 1;
        }
        counts.warnings += p.flags.iter().any(|f| WARNING_POINT_FLAGS.contains(f)) as usize;
    }
    for (_, a) in &assessed {
        for f in &a.flags {
            *counts.assessment_flags.entry(flag_name(f)).or_default() += 1;
        }
        counts.warnings += a.flags.iter().any(|f| WARNING_ASSESSMENT_FLAGS.contains(f)) as usize;
    }
    counts.warnings += model.orphans.len();

    std::fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let out = |name: &str| args.out.join(name);
    let mut outputs = vec![MODEL_FILE.to_string(), POINTS_FILE.to_string()];
    write_atomic(&out(MODEL_FILE), json::to_text(&model_to_json(&model)).as_bytes())?;
    write_atomic(&out(POINTS_FILE), json::to_text(&pruning_document(&assessed, &points, &cfg)).as_bytes())?;
    lap("write", &mut timings);
    if !args.no_overlay {
        let img = render_overlay(canvas, &model, &points);
        let mut png = Vec::new();
        img.write_to(&mut std::io::Cursor::new(&mut png), image::ImageFormat::Png)?;
        write_atomic(&out(OVERLAY_FILE), &png)?;
        outputs.push(OVERLAY_FILE.to_string());
        lap("overlay", &mut timings);
    }

    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        inputs: BTreeMap::from([
            ("annotations".to_string(), Some(args.annotations.display().to_string())),
            ("depth".to_string(), display(&args.depth)),
            ("constant_depth_m".to_string(), args.constant_depth_m.map(|m| m.to_string())),
            ("config".to_string(), display(&args.config)),
            ("image".to_string(), display(&args.image)),
            ("image_id".to_string(), args.image_id.clone()),
        ]),
        out_dir: args.out.display().to_string(),
        config_sha256: sha256_hex(cfg.to_kv_string().as_bytes()),
        outputs,
        timings_ms: timings,
        counts,
    };
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    write_atomic(&out(MANIFEST_FILE), text.as_bytes())?;
    Ok(manifest)
}

/// Paths of the files a run writes into `dir`.
pub fn output_paths(dir: &Path) -> [PathBuf; 4] {
    [MODEL_FILE, POINTS_FILE, OVERLAY_FILE, MANIFEST_FILE].map(|f| dir.join(f))
}
