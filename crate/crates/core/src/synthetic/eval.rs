use serde::Serialize;

use crate::assess::assess_all;
use crate::config::PipelineConfig;
use crate::error::Result;
use crate::exec::{self, Execution};
use crate::instance::OrganClass;
use crate::model::{assemble_model, PlantModel};
use crate::pruning::{generate_pruning_points, PointFlag, PruningPoint};
use crate::rules::CutType;

use super::generate::{generate_scene_with, SceneBundle};
use super::perturb::perturb;
use super::score::{score_model, EdgeScore};
use super::spec::SceneSpec;

/// Outcome of running the pipeline on one generated scene.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SceneReport {
    pub seed: u64,
    pub instances: usize,
    pub edges: EdgeScore,
    pub orphans: usize,
    pub regions: usize,
    pub points: usize,
    pub points_on_mask: usize,
    pub points_correction_failed: usize,
    /// Off the target mask without a correction-failure flag.
    pub points_off_organ_unflagged: usize,
    /// Spur-cut points on canes carrying more than N true nodes.
    pub spur_checked: usize,
    /// Of those, points with exactly N true nodes between cut and cane base.
    pub spur_preserving: usize,
    /// Spur-cut points on canes with at most N true nodes.
    pub spur_short: usize,
    /// Of those, points marked as fallback placements.
    pub spur_short_fallback: usize,
    /// Largest distance to the matching expected point, when the predicted
    /// and expected point lists pair up.
    pub max_point_error_px: Option<f64>,
}

/// Number of true nodes of `cane` lying strictly between its base and `pos`
/// along the cane axis.
pub fn nodes_below(bundle: &SceneBundle, cane: usize, pos: (f64, f64)) -> (usize, usize) {
    let base = bundle.organs[cane].origin;
    let along = |x: f64, y: f64| (x - base.x).hypot(y - base.y);
    let cut = along(pos.0, pos.1);
    let nodes: Vec<_> =
        bundle.organs.iter().filter(|o| o.class == OrganClass::Node && o.parent == Some(cane)).collect();
    let below = nodes.iter().filter(|n| along(n.origin.x, n.origin.y) < cut).count();
    (below, nodes.len())
}

/// Score `points` and `model` against the bundle's ground truth.
pub fn report(
    bundle: &SceneBundle,
    model: &PlantModel,
    regions: usize,
    points: &[PruningPoint],
    cfg: &PipelineConfig,
) -> Result<SceneReport> {
    let edges = score_model(model, &bundle.truth_tree)?;
    let n = cfg.spur_nodes_n as usize;
    let mut r = SceneReport {
        seed: bundle.spec.seed,
        instances: bundle.records.len(),
        edges,
        orphans: model.orphans.len(),
        regions,
        points: points.len(),
        points_on_mask: 0,
        points_correction_failed: 0,
        points_off_organ_unflagged: 0,
        spur_checked: 0,
        spur_preserving: 0,
        spur_short: 0,
        spur_short_fallback: 0,
        max_point_error_px: None,
    };
    for p in points {
        let on_mask = bundle.records[p.target_item_id].mask.contains(p.position_px);
        let failed = p.flags.contains(&PointFlag::CorrectionFailed);
        r.points_on_mask += on_mask as usize;
        r.points_correction_failed += failed as usize;
        r.points_off_organ_unflagged += (!on_mask && !failed) as usize;

        let spur_like = matches!(p.cut, CutType::SpurCut | CutType::ReplacementCut);
        if spur_like && bundle.organs[p.target_item_id].class == OrganClass::Cane {
            let pos = (p.position_px.x as f64, p.position_px.y as f64);
            let (below, total) = nodes_below(bundle, p.target_item_id, pos);
            if total > n {
                r.spur_checked += 1;
                r.spur_preserving += (below == n) as usize;
            } else {
                r.spur_short += 1;
                r.spur_short_fallback += p.flags.contains(&PointFlag::Fallback) as usize;
            }
        }
    }
    let paired = points.len() == bundle.truth_points.len()
        && points
            .iter()
            .zip(&bundle.truth_points)
            .all(|(p, t)| p.region_id == t.region_id && p.target_item_id == t.target_item_id && p.cut == t.cut);
    if paired {
        r.max_point_error_px = Some(
            points
                .iter()
                .zip(&bundle.truth_points)
                .map(|(p, t)| p.position_px.to_point().distance(t.position))
                .fold(0.0, f64::max),
        );
    }
    Ok(r)
}

/// Generate, perturb with `spec.ops`, run the full pipeline and score it.
pub fn evaluate_scene(spec: &SceneSpec, cfg: &PipelineConfig) -> Result<SceneReport> {
    let clean = generate_scene_with(spec, cfg)?;
    let bundle = perturb(&clean, &spec.ops, spec.seed);
    let model = assemble_model(&bundle.records, bundle.depth.clone(), &bundle.intrinsics, cfg)?;
    let assessed = assess_all(&model, cfg, Execution::Sequential);
    let points = generate_pruning_points(&model, &assessed, cfg);
    report(&bundle, &model, assessed.len(), &points, cfg)
}

/// Evaluate every spec, scenes spread over threads in parallel mode.
pub fn evaluate_grid(specs: &[SceneSpec], cfg: &PipelineConfig, mode: Execution) -> Vec<Result<SceneReport>> {
    exec::map(mode, specs, |s| evaluate_scene(s, cfg))
}

/// Aggregates over a set of scene reports.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridSummary {
    pub scenes: usize,
    pub isomorphic: usize,
    /// Micro-averaged over all edges.
    pub precision: f64,
    pub recall: f64,
    pub points: usize,
    pub points_on_mask: usize,
    pub points_off_organ_unflagged: usize,
}

impl GridSummary {
    pub fn of(reports: &[SceneReport]) -> Self {
        let sum = |f: fn(&SceneReport) -> usize| reports.iter().map(f).sum::<usize>();
        let tp = sum(|r| r.edges.true_positives);
        let pred = sum(|r| r.edges.predicted);
        let truth = sum(|r| r.edges.truth);
        let ratio = |a: usize, b: usize| if b == 0 { 1.0 } else { a as f64 / b as f64 };
        GridSummary {
            scenes: reports.len(),
            isomorphic: reports.iter().filter(|r| r.edges.isomorphic).count(),
            precision: ratio(tp, pred),
            recall: ratio(tp, truth),
            points: sum(|r| r.points),
            points_on_mask: sum(|r| r.points_on_mask),
            points_off_organ_unflagged: sum(|r| r.points_off_organ_unflagged),
        }
    }
}
