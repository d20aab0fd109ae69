use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::camera::CameraIntrinsics;

use super::perturb::PerturbOp;

/// Which way a region grows from the cordon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Attached to the cordon's top edge, growing towards row 0.
    Up,
    /// Hanging from the cordon's bottom edge.
    Down,
}

/// Organ carrying a region's canes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionKind {
    Spur,
    Arm,
    /// A single cane directly on the cordon.
    Cane,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaneSpec {
    pub length: u32,
    /// Odd widths keep the cane axis on a pixel column.
    pub width: u32,
    pub node_count: u32,
    /// Distance between consecutive node centres, and from the cane base to
    /// the first node centre.
    pub node_spacing: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionSpec {
    pub kind: RegionKind,
    /// Centre column of the carrier organ.
    pub x: u32,
    pub direction: Direction,
    /// Length of the spur or arm; ignored for cane regions.
    pub carrier_length: u32,
    pub canes: Vec<CaneSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CordonSpec {
    pub x0: u32,
    pub y0: u32,
    pub length: u32,
    pub diameter: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub seed: u64,
    pub width: u32,
    pub height: u32,
    pub camera: CameraIntrinsics,
    /// Depth of every organ pixel; background has no depth.
    pub plane_depth_m: f64,
    pub cordon: CordonSpec,
    pub regions: Vec<RegionSpec>,
    /// Side length of the square node boxes; also the gap between sibling canes.
    pub node_size: u32,
    /// Degradations applied by [`super::perturb`], not by generation.
    #[serde(default)]
    pub ops: Vec<PerturbOp>,
}

/// Free columns left and right of the canes on a spur or arm.
pub const CARRIER_MARGINS: (u32, u32) = (4, 10);

impl RegionSpec {
    /// Width of the spur or arm holding this region's canes side by side,
    /// `node_size` apart.
    pub fn carrier_width(&self, node_size: u32) -> u32 {
        let canes: u32 = self.canes.iter().map(|c| c.width).sum();
        canes + node_size * (self.canes.len() as u32).saturating_sub(1) + CARRIER_MARGINS.0 + CARRIER_MARGINS.1
    }
}

pub const DEFAULT_WIDTH: u32 = 640;
pub const DEFAULT_HEIGHT: u32 = 480;

pub fn default_camera() -> CameraIntrinsics {
    CameraIntrinsics {
        fx: 600.0,
        fy: 600.0,
        cx: DEFAULT_WIDTH as f64 / 2.0,
        cy: DEFAULT_HEIGHT as f64 / 2.0,
        depth_scale: 0.001,
    }
}

impl SceneSpec {
    /// Five spur regions with one upward cane and three nodes each.
    pub fn five_spurs(seed: u64) -> Self {
        let regions = (0..5)
            .map(|i| RegionSpec {
                kind: RegionKind::Spur,
                x: 100 + 110 * i,
                direction: Direction::Up,
                carrier_length: 30,
                canes: vec![CaneSpec { length: 120, width: 7, node_count: 3, node_spacing: 25 }],
            })
            .collect();
        SceneSpec {
            seed,
            width: DEFAULT_WIDTH,
            height: DEFAULT_HEIGHT,
            camera: default_camera(),
            plane_depth_m: 1.0,
            cordon: CordonSpec { x0: 40, y0: 225, length: 560, diameter: 30 },
            regions,
            node_size: 9,
            ops: Vec::new(),
        }
    }

    /// Member `seed` of the default scene grid.
    ///
    /// Regions are spurs, arms or single canes, mostly growing upwards, with
    /// one or two canes of varying width and zero to four nodes.
    pub fn randomized(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut spec = SceneSpec::five_spurs(seed);
        spec.plane_depth_m = (rng.random_range(0.8..1.3f64) * 1000.0).round() / 1000.0;
        spec.cordon.diameter = 2 * rng.random_range(12..=18);
        spec.cordon.y0 = 240 - spec.cordon.diameter / 2;
        let n_regions = rng.random_range(3..=5u32);
        let first = 90 + rng.random_range(0..=20u32);
        let spacing = rng.random_range(90..=((560 - first) / (n_regions - 1)).min(125));
        spec.regions = (0..n_regions)
            .map(|i| {
                let kind = match rng.random_range(0..10) {
                    0..=5 => RegionKind::Spur,
                    6..=7 => RegionKind::Arm,
                    _ => RegionKind::Cane,
                };
                let direction = if rng.random_bool(0.2) { Direction::Down } else { Direction::Up };
                let carrier_length = match kind {
                    RegionKind::Spur => rng.random_range(24..=36),
                    RegionKind::Arm => rng.random_range(45..=65),
                    RegionKind::Cane => 0,
                };
                let n_canes = if kind == RegionKind::Cane { 1 } else { rng.random_range(1..=2) };
                let canes = (0..n_canes)
                    .map(|_| {
                        let length = rng.random_range(90..=130);
                        let node_spacing = rng.random_range(20..=26);
                        let max_nodes = (length - 1 - spec.node_size / 2) / node_spacing;
                        CaneSpec {
                            length,
                            width: [5, 7, 9, 11][rng.random_range(0..4)],
                            node_count: rng.random_range(0..=4u32).min(max_nodes),
                            node_spacing,
                        }
                    })
                    .collect();
                let mut region = RegionSpec { kind, x: first + spacing * i, direction, carrier_length, canes };
                // Keep spurs and arms taller than wide so their major axis is vertical.
                if kind != RegionKind::Cane {
                    region.carrier_length = carrier_length.max(region.carrier_width(spec.node_size) + 4);
                }
                region
            })
            .collect();
        // Keep ideal vigor off the default range ends, where rounding decides the cut.
        let defaults = crate::config::PipelineConfig::default();
        let on_edge = |z: f64| {
            spec.regions.iter().flat_map(|r| &r.canes).any(|c| {
                let v = (c.width - 1) as f64 * z / spec.camera.fx;
                (v - defaults.vigor_min).abs() < 1e-9 || (v - defaults.vigor_max).abs() < 1e-9
            })
        };
        while on_edge(spec.plane_depth_m) {
            spec.plane_depth_m += 0.001;
        }
        let last = spec.regions.last().map_or(0, |r| r.x);
        spec.cordon.length = (last + 60).min(spec.width - 20) - spec.cordon.x0;
        spec
    }
}
