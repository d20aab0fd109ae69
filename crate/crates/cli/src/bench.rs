//! The `bench` command: score the pipeline over a grid of synthetic scenes.
//!
//! A grid file is JSON:
//!
//! ```json
//! { "cells": [
//!     { "name": "clean", "seeds": { "start": 0, "end": 200 } },
//!     { "name": "occluded", "seeds": [0, 1, 2],
//!       "ops": [{ "op": "occlude", "fraction": 0.3, "width_px": 6 }],
//!       "config": { "correction_max_radius": 15 } }
//! ] }
//! ```
//!
//! Each cell writes `<out>/<name>/scenes.csv`; `<out>/summary.csv` holds one
//! line per cell.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use vinecut_core::exec::{self, Execution};
use vinecut_core::synthetic::{evaluate_scene, GridSummary, PerturbOp, SceneReport, SceneSpec};
use vinecut_core::PipelineConfig;

use crate::output::write_atomic;
use crate::run::{EXIT_FATAL, EXIT_OK, EXIT_WARNINGS};

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Seeds {
    Range { start: u64, end: u64 },
    List(Vec<u64>),
}

impl Seeds {
    fn expand(&self) -> Vec<u64> {
        match self {
            Seeds::Range { start, end } => (*start..*end).collect(),
            Seeds::List(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Generator {
    #[default]
    Randomized,
    FiveSpurs,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Cell {
    pub name: String,
    pub seeds: Seeds,
    #[serde(default)]
    pub generator: Generator,
    #[serde(default)]
    pub ops: Vec<PerturbOp>,
    /// Config overrides as key/value pairs of the config file format.
    #[serde(default)]
    pub config: serde_json::Map<String, Value>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub cells: Vec<Cell>,
}

impl Cell {
    pub fn pipeline_config(&self) -> Result<PipelineConfig> {
        let text: String = self
            .config
            .iter()
            .map(|(k, v)| match v {
                Value::String(s) => format!("{k} = {s}\n"),
                other => format!("{k} = {other}\n"),
            })
            .collect();
        PipelineConfig::from_kv_str(&text).with_context(|| format!("cell `{}` config", self.name))
    }

    pub fn specs(&self) -> Vec<SceneSpec> {
        self.seeds
            .expand()
            .into_iter()
            .map(|seed| {
                let mut spec = match self.generator {
                    Generator::Randomized => SceneSpec::randomized(seed),
                    Generator::FiveSpurs => SceneSpec::five_spurs(seed),
                };
                spec.ops = self.ops.clone();
                spec
            })
            .collect()
    }
}

/// One CSV line per scene; failed scenes carry only the error.
#[derive(Debug, Clone, Default, Serialize)]
pub struct SceneRow {
    pub seed: u64,
    pub status: String,
    pub error: String,
    pub instances: Option<usize>,
    pub edges_truth: Option<usize>,
    pub edges_predicted: Option<usize>,
    pub edges_true_positive: Option<usize>,
    pub edge_precision: Option<f64>,
    pub edge_recall: Option<f64>,
    pub isomorphic: Option<bool>,
    pub orphans: Option<usize>,
    pub regions: Option<usize>,
    pub points: Option<usize>,
    pub points_on_mask: Option<usize>,
    pub points_correction_failed: Option<usize>,
    pub points_off_organ_unflagged: Option<usize>,
    pub spur_checked: Option<usize>,
    pub spur_preserving: Option<usize>,
    pub spur_short: Option<usize>,
    pub spur_short_fallback: Option<usize>,
    pub max_point_error_px: Option<f64>,
}

impl SceneRow {
    fn ok(r: &SceneReport) -> Self {
        SceneRow {
            seed: r.seed,
            status: "ok".into(),
            error: String::new(),
            instances: Some(r.instances),
            edges_truth: Some(r.edges.truth),
            edges_predicted: Some(r.edges.predicted),
            edges_true_positive: Some(r.edges.true_positives),
            edge_precision: Some(r.edges.precision),
            edge_recall: Some(r.edges.recall),
            isomorphic: Some(r.edges.isomorphic),
            orphans: Some(r.orphans),
            regions: Some(r.regions),
            points: Some(r.points),
            points_on_mask: Some(r.points_on_mask),
            points_correction_failed: Some(r.points_correction_failed),
            points_off_organ_unflagged: Some(r.points_off_organ_unflagged),
            spur_checked: Some(r.spur_checked),
            spur_preserving: Some(r.spur_preserving),
            spur_short: Some(r.spur_short),
            spur_short_fallback: Some(r.spur_short_fallback),
            max_point_error_px: r.max_point_error_px,
        }
    }

    fn failed(seed: u64, error: String) -> Self {
        SceneRow { seed, status: "failed".into(), error, ..SceneRow::default() }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CellSummary {
    pub cell: String,
    pub scenes: usize,
    pub failed: usize,
    pub isomorphic: usize,
    pub edge_precision: f64,
    pub edge_recall: f64,
    pub points: usize,
    pub points_on_mask: usize,
    pub points_off_organ_unflagged: usize,
}

fn panic_message(p: Box<dyn std::any::Any + Send>) -> String {
    p.downcast_ref::<&str>()
        .map(|s| s.to_string())
        .or_else(|| p.downcast_ref::<String>().cloned())
        .unwrap_or_else(|| "panic".into())
}

/// Outcome of one scene: its report, or the error or panic message.
pub type SceneOutcome = (u64, std::result::Result<SceneReport, String>);

/// Evaluate every scene of `cell`; errors and panics are caught per scene.
pub fn run_cell(cell: &Cell, mode: Execution) -> Result<Vec<SceneOutcome>> {
    let cfg = cell.pipeline_config()?;
    let specs = cell.specs();
    Ok(exec::map(mode, &specs, |spec| {
        let outcome = match catch_unwind(AssertUnwindSafe(|| evaluate_scene(spec, &cfg))) {
            Ok(Ok(r)) => Ok(r),
            Ok(Err(e)) => Err(e.to_string()),
            Err(p) => Err(panic_message(p)),
        };
        (spec.seed, outcome)
    }))
}

pub fn rows(outcomes: &[SceneOutcome]) -> Vec<SceneRow> {
    outcomes
        .iter()
        .map(|(seed, o)| match o {
            Ok(r) => SceneRow::ok(r),
            Err(e) => SceneRow::failed(*seed, e.clone()),
        })
        .collect()
}

pub fn summarize(cell: &str, outcomes: &[SceneOutcome]) -> CellSummary {
    let reports: Vec<SceneReport> = outcomes.iter().filter_map(|(_, o)| o.as_ref().ok().cloned()).collect();
    let s = GridSummary::of(&reports);
    CellSummary {
        cell: cell.to_string(),
        scenes: outcomes.len(),
        failed: outcomes.len() - reports.len(),
        isomorphic: s.isomorphic,
        edge_precision: s.precision,
        edge_recall: s.recall,
        points: s.points,
        points_on_mask: s.points_on_mask,
        points_off_organ_unflagged: s.points_off_organ_unflagged,
    }
}

fn csv_bytes<T: Serialize>(rows: &[T]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    Ok(w.into_inner().map_err(|e| e.into_error())?)
}

fn valid_cell_name(name: &str) -> bool {
    !name.is_empty()
        && name.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c))
        && name != "."
        && name != ".."
}

pub fn load_grid(path: &Path) -> Result<Grid> {
    let text = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let grid: Grid = serde_json::from_slice(&text).with_context(|| format!("parsing grid {}", path.display()))?;
    if grid.cells.is_empty() {
        bail!("{}: grid has no cells", path.display());
    }
    let mut names = std::collections::BTreeSet::new();
    for c in &grid.cells {
        if !valid_cell_name(&c.name) {
            bail!("{}: cell name `{}` must be a plain file name", path.display(), c.name);
        }
        if !names.insert(&c.name) {
            bail!("{}: duplicate cell `{}`", path.display(), c.name);
        }
        if c.seeds.expand().is_empty() {
            bail!("{}: cell `{}` has no seeds", path.display(), c.name);
        }
    }
    Ok(grid)
}

pub struct BenchArgs {
    pub grid: PathBuf,
    pub out: PathBuf,
    /// Worker threads; 1 runs sequentially, `None` uses every core.
    pub jobs: Option<usize>,
}

pub fn bench(args: &BenchArgs) -> Result<Vec<CellSummary>> {
    let grid = load_grid(&args.grid)?;
    let mode = if args.jobs == Some(1) { Execution::Sequential } else { Execution::Parallel };
    let mut summaries = Vec::new();
    for cell in &grid.cells {
        let outcomes = in_pool(args.jobs, || run_cell(cell, mode))?;
        let dir = args.out.join(&cell.name);
        std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        write_atomic(&dir.join("scenes.csv"), &csv_bytes(&rows(&outcomes))?)?;
        let summary = summarize(&cell.name, &outcomes);
        log::info!(
            "{}: {}/{} isomorphic, recall {:.3}, {} failed",
            cell.name,
            summary.isomorphic,
            summary.scenes,
            summary.edge_recall,
            summary.failed
        );
        summaries.push(summary);
    }
    write_atomic(&args.out.join("summary.csv"), &csv_bytes(&summaries)?)?;
    Ok(summaries)
}

/// Run `f` on a pool of `jobs` threads when the parallel backend is built in.
#[cfg(feature = "parallel")]
fn in_pool<R: Send>(jobs: Option<usize>, f: impl FnOnce() -> Result<R> + Send) -> Result<R> {
    match jobs {
        Some(n) if n > 1 => rayon::ThreadPoolBuilder::new().num_threads(n).build()?.install(f),
        _ => f(),
    }
}

#[cfg(not(feature = "parallel"))]
fn in_pool<R>(_jobs: Option<usize>, f: impl FnOnce() -> Result<R>) -> Result<R> {
    f()
}

/// Run the grid and map the outcome to the exit-code contract: failed scenes
/// give 2, unreadable grids or unwritable outputs give 1.
pub fn cmd_bench(args: &BenchArgs) -> i32 {
    match bench(args) {
        Ok(s) if s.iter().any(|c| c.failed > 0) => EXIT_WARNINGS,
        Ok(_) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_FATAL
        }
    }
}
