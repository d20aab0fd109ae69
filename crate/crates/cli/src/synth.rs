//! The `synth` command: write a generated scene in the formats `run` reads.

use std::path::Path;

use anyhow::{Context, Result};
use vinecut_core::synthetic::{generate_scene, perturb, SceneSpec};
use vinecut_core::PipelineConfig;

use crate::output::write_atomic;

pub const ANNOTATIONS_FILE: &str = "annotations.json";
pub const DEPTH_FILE: &str = "depth.png";
pub const CONFIG_FILE: &str = "config.cfg";
pub const SPEC_FILE: &str = "spec.json";

/// Generate `spec`, apply its perturbations and write annotations, depth, a
/// config carrying the camera and the spec itself into `out`.
pub fn write_scene(spec: &SceneSpec, out: &Path) -> Result<()> {
    let clean = generate_scene(spec)?;
    let bundle = perturb(&clean, &spec.ops, spec.seed);
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let cfg = PipelineConfig { camera: Some(bundle.intrinsics), ..PipelineConfig::default() };
    write_atomic(&out.join(ANNOTATIONS_FILE), bundle.to_coco_json()?.as_bytes())?;
    write_atomic(&out.join(DEPTH_FILE), &bundle.depth_png()?)?;
    write_atomic(&out.join(CONFIG_FILE), cfg.to_kv_string().as_bytes())?;
    write_atomic(&out.join(SPEC_FILE), (serde_json::to_string_pretty(spec)? + "\n").as_bytes())?;
    Ok(())
}
