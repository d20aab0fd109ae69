//! Parent/child connection search between two organ classes.

use std::collections::BTreeMap;

use crate::config::ConnectionParams;
use crate::instance::InstanceRecord;
use crate::mask::{centroid, Mask, Pixel};
use crate::raster::{dilate, overlap_labels, slot_index, LabelMap, Overlap};

use super::ConnectionInfo;

/// Which footprint of a child is dilated during the search.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChildShape {
    Mask,
    /// Filled bounding box; used for nodes, whose masks are tiny.
    BoundingBox,
}

/// Accepted attachment of one child.
#[derive(Debug, Clone, PartialEq)]
pub struct Connection {
    pub parent_id: usize,
    pub info: ConnectionInfo,
    /// Overlap between the (dilated) child and the parent, row-major.
    pub intersection: Vec<Pixel>,
}

/// Label map over the masks of `parents`; pixel value is `instance_id + 1`,
/// the higher ID winning where masks overlap.
pub fn build_label_map(parents: &[&InstanceRecord], width: u32, height: u32) -> LabelMap {
    LabelMap::from_masks(width, height, parents.iter().map(|r| (r.instance_id, &r.mask)))
}

#[derive(Clone, Copy)]
enum Pick {
    /// Overlap centroid with the greatest row.
    Lowest,
    /// Overlap centroid with the smallest row.
    Highest,
}

fn pick(overlaps: Vec<Overlap>, how: Pick) -> Option<Overlap> {
    let keyed = overlaps.into_iter().map(|o| (centroid(o.pixels.iter().copied()).map_or(0.0, |c| c.y), o));
    let best = match how {
        // Ties go to the lower instance ID, overlaps arriving in ascending ID.
        Pick::Lowest => keyed.reduce(|a, b| if b.0 > a.0 { b } else { a }),
        Pick::Highest => keyed.reduce(|a, b| if b.0 < a.0 { b } else { a }),
    };
    best.map(|(_, o)| o)
}

/// Search for one child's parent.
///
/// Iteration 0 tests the undilated footprint; each later iteration dilates
/// the previous footprint once more by `params.dilation`. The lowest
/// overlapping parent is accepted when the overlap centroid lies in the last
/// band of the footprint's box. If no iteration succeeds and
/// `include_top` is set, the search repeats with the highest parent and the
/// first band.
pub fn connect_child(
    labels: &LabelMap,
    child: &InstanceRecord,
    params: &ConnectionParams,
    shape: ChildShape,
) -> Option<Connection> {
    let base = match shape {
        ChildShape::Mask => child.mask.clone(),
        ChildShape::BoundingBox => child.mask.bbox_mask(),
    };
    let n = params.n_slots;
    let mut attempts = vec![(Pick::Lowest, n, false)];
    if params.include_top {
        attempts.push((Pick::Highest, 1, true));
    }
    for (how, want_slot, fallback) in attempts {
        let mut footprint: Mask = base.clone();
        for iteration in 0..=params.max_iter {
            if iteration > 0 {
                footprint = dilate(&footprint, params.dilation);
            }
            let Some(bbox) = footprint.bbox() else { break };
            let Some(best) = pick(overlap_labels(labels, &footprint), how) else {
                continue;
            };
            let slot = slot_index(&bbox, &best.pixels, n);
            if slot == want_slot {
                return Some(Connection {
                    parent_id: best.instance_id,
                    info: ConnectionInfo { iteration, slot, fallback },
                    intersection: best.pixels,
                });
            }
        }
    }
    None
}

/// Connections from `children` to `parents`, keyed by child instance ID.
/// Children that find no parent are absent.
pub fn compute_connections(
    parents: &[&InstanceRecord],
    children: &[&InstanceRecord],
    params: &ConnectionParams,
    shape: ChildShape,
) -> BTreeMap<usize, Connection> {
    let Some(first) = parents.first().or(children.first()) else {
        return BTreeMap::new();
    };
    let labels = build_label_map(parents, first.mask.width(), first.mask.height());
    children.iter().filter_map(|c| connect_child(&labels, c, params, shape).map(|conn| (c.instance_id, conn))).collect()
}
