//! Tree-structured plant model.
//!
//! Items live in an arena indexed by instance ID. Main cordons are the roots;
//! every connected item hangs below exactly one of them. Items the connection
//! search could not attach are listed as orphans together with whatever was
//! attached below them.

mod assemble;
mod connect;
mod serialize;

use std::sync::Arc;

use serde::Serialize;

pub use assemble::{assemble_model, derive_geometry, ItemGeometry};
pub use connect::{build_label_map, compute_connections, ChildShape, Connection};
pub use serialize::model_to_json;

use crate::camera::{CameraIntrinsics, Point3};
use crate::depth::DepthImage;
use crate::instance::{InstanceRecord, OrganClass};
use crate::mask::Point2;

/// How an item was attached to its parent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ConnectionInfo {
    /// Dilation steps applied before the overlap was accepted.
    pub iteration: u32,
    pub slot: u32,
    /// Attached through the first-band retry.
    pub fallback: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ItemFlag {
    /// No valid depth near the origin; 3D geometry missing.
    NoOriginDepth,
    /// No valid depth near the endpoint.
    NoEndpointDepth,
}

#[derive(Debug, Clone)]
pub struct GrapevineItem {
    pub instance: InstanceRecord,
    pub origin_px: Point2,
    pub endpoint_px: Point2,
    pub origin_3d: Option<Point3>,
    pub endpoint_3d: Option<Point3>,
    pub parent: Option<usize>,
    /// Sorted by `distance_from_parent`, then instance ID.
    pub children: Vec<usize>,
    /// Pixel distance between the parent's origin and this item's origin.
    pub distance_from_parent: f64,
    pub link: Option<ConnectionInfo>,
    pub flags: Vec<ItemFlag>,
}

impl GrapevineItem {
    pub fn id(&self) -> usize {
        self.instance.instance_id
    }

    pub fn class(&self) -> OrganClass {
        self.instance.organ_class
    }
}

/// Scene context shared by the model and everything derived from it.
#[derive(Debug, Clone)]
pub struct Scene {
    pub width: u32,
    pub height: u32,
    pub intrinsics: CameraIntrinsics,
    pub depth: Arc<DepthImage>,
}

#[derive(Debug, Clone)]
pub struct PlantModel {
    pub items: Vec<GrapevineItem>,
    /// Main cordons ordered by origin column.
    pub roots: Vec<usize>,
    /// Non-cordon items without a parent, ascending ID.
    pub orphans: Vec<usize>,
    pub scene: Scene,
}

/// Problems found by [`PlantModel::check_invariants`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ModelViolation {
    IllegalEdge { parent: usize, child: usize },
    ParentMismatch { parent: usize, child: usize },
    Unreachable(usize),
    ReachedTwice(usize),
    ChildOrder(usize),
    RootNotCordon(usize),
}

impl PlantModel {
    pub fn item(&self, id: usize) -> &GrapevineItem {
        &self.items[id]
    }

    /// `(parent_id, child_id)` for every edge, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out: Vec<(usize, usize)> = self.items.iter().filter_map(|it| it.parent.map(|p| (p, it.id()))).collect();
        out.sort_unstable();
        out
    }

    /// Pre-order IDs of the subtree rooted at `id`, children in stored order.
    pub fn subtree(&self, id: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![id];
        while let Some(cur) = stack.pop() {
            out.push(cur);
            stack.extend(self.items[cur].children.iter().rev());
        }
        out
    }

    /// Number of levels below and including the deepest root.
    pub fn depth(&self) -> usize {
        fn level(m: &PlantModel, id: usize) -> usize {
            1 + m.items[id].children.iter().map(|c| level(m, *c)).max().unwrap_or(0)
        }
        self.roots.iter().map(|r| level(self, *r)).max().unwrap_or(0)
    }

    /// Main cordon the item ultimately hangs from, if any.
    pub fn root_of(&self, mut id: usize) -> Option<usize> {
        while let Some(p) = self.items[id].parent {
            id = p;
        }
        (self.items[id].class() == OrganClass::MainCordon).then_some(id)
    }

    /// Check class legality, parent/child consistency, reachability and child ordering.
    pub fn check_invariants(&self) -> Vec<ModelViolation> {
        let mut out = Vec::new();
        for it in &self.items {
            for &c in &it.children {
                let child = &self.items[c];
                if !it.class().can_parent(child.class()) {
                    out.push(ModelViolation::IllegalEdge { parent: it.id(), child: c });
                }
                if child.parent != Some(it.id()) {
                    out.push(ModelViolation::ParentMismatch { parent: it.id(), child: c });
                }
            }
            let sorted = it
                .children
                .windows(2)
                .all(|w| self.items[w[0]].distance_from_parent <= self.items[w[1]].distance_from_parent);
            if !sorted {
                out.push(ModelViolation::ChildOrder(it.id()));
            }
        }
        for &r in &self.roots {
            if self.items[r].class() != OrganClass::MainCordon || self.items[r].parent.is_some() {
                out.push(ModelViolation::RootNotCordon(r));
            }
        }
        let mut seen = vec![0u32; self.items.len()];
        for &top in self.roots.iter().chain(&self.orphans) {
            for id in self.subtree(top) {
                seen[id] += 1;
                if seen[id] > 1 && seen[id] <= self.items.len() as u32 + 1 {
                    out.push(ModelViolation::ReachedTwice(id));
                }
                if seen[id] > self.items.len() as u32 {
                    return out;
                }
            }
        }
        for (id, n) in seen.iter().enumerate() {
            if *n == 0 {
                out.push(ModelViolation::Unreachable(id));
            }
        }
        out
    }
}
