//! Procedural grapevine scenes with closed-form ground truth.
//!
//! Organs are axis-aligned rectangles on a fronto-parallel plane, so every
//! expected quantity (tree, origins, assessments, pruning points) follows
//! directly from the layout without looking at masks.

mod eval;
mod generate;
mod perturb;
mod score;
mod spec;

pub use eval::{evaluate_grid, evaluate_scene, nodes_below, report, GridSummary, SceneReport};
pub use generate::{
    generate_scene, generate_scene_with, OrganTruth, SceneBundle, TruthPoint, MIN_REGION_GAP, OVERLAP_ROWS,
};
pub use perturb::{mask_to_rects, perturb, PerturbOp};
pub use score::{score_model, EdgeScore};
pub use spec::{
    default_camera, CaneSpec, CordonSpec, Direction, RegionKind, RegionSpec, SceneSpec, DEFAULT_HEIGHT, DEFAULT_WIDTH,
};

/// Seeds of the default scene grid.
pub const DEFAULT_GRID: std::ops::Range<u64> = 0..200;

/// The default grid as specs.
pub fn default_grid() -> Vec<SceneSpec> {
    DEFAULT_GRID.map(SceneSpec::randomized).collect()
}
