use std::collections::BTreeMap;
use std::sync::Arc;

use crate::camera::{deproject, CameraIntrinsics, Point3};
use crate::config::{ConnectionPair, PipelineConfig, RootSide};
use crate::depth::{estimate_real_depth, DepthImage};
use crate::error::{Error, Result};
use crate::instance::{InstanceRecord, OrganClass};
use crate::mask::{centroid, Pixel, Point2};

use super::connect::{compute_connections, ChildShape, Connection};
use super::{GrapevineItem, ItemFlag, PlantModel, Scene};

/// Origin, endpoint and their 3D counterparts for one item.
#[derive(Debug, Clone, PartialEq)]
pub struct ItemGeometry {
    pub origin_px: Point2,
    pub endpoint_px: Point2,
    pub origin_3d: Option<Point3>,
    pub endpoint_3d: Option<Point3>,
    pub flags: Vec<ItemFlag>,
}

/// Geometry of `record`.
///
/// The origin is the centroid of `intersection` when the item is attached.
/// Unattached cordons use the centroid of the `root_band_px` columns at the
/// `root_side` end of the mask; other unattached items use the mask centroid.
/// The endpoint is the mask pixel farthest from the origin, the first in
/// row-major order on ties.
pub fn derive_geometry(
    record: &InstanceRecord,
    intersection: Option<&[Pixel]>,
    depth: &DepthImage,
    cam: &CameraIntrinsics,
    cfg: &PipelineConfig,
) -> ItemGeometry {
    let mask = &record.mask;
    let origin_px = match intersection {
        Some(px) if !px.is_empty() => centroid(px.iter().copied()),
        _ if record.organ_class == OrganClass::MainCordon => {
            let band = cfg.root_band_px.max(1) - 1;
            let (lo, hi) = match cfg.root_side {
                RootSide::Left => (record.bbox.x0, record.bbox.x0.saturating_add(band)),
                RootSide::Right => (record.bbox.x1.saturating_sub(band), record.bbox.x1),
            };
            centroid(mask.pixels().filter(|p| p.x >= lo && p.x <= hi))
        }
        _ => mask.centroid(),
    }
    .expect("instance masks are non-empty");

    let mut best = (f64::NEG_INFINITY, Point2::new(0.0, 0.0));
    for p in mask.pixels() {
        let d = p.to_point().distance(origin_px);
        if d > best.0 {
            best = (d, p.to_point());
        }
    }
    let endpoint_px = best.1;

    let lift = |p: Point2| -> Option<Point3> {
        let px = p.round_clamped(depth.width(), depth.height());
        let z = estimate_real_depth(px, depth, cam.depth_scale, cfg.depth_window, cfg.correction_max_radius).ok()?;
        deproject(p, z, cam).ok()
    };
    let origin_3d = lift(origin_px);
    let endpoint_3d = lift(endpoint_px);
    let mut flags = Vec::new();
    if origin_3d.is_none() {
        flags.push(ItemFlag::NoOriginDepth);
    }
    if endpoint_3d.is_none() {
        flags.push(ItemFlag::NoEndpointDepth);
    }
    ItemGeometry { origin_px, endpoint_px, origin_3d, endpoint_3d, flags }
}

/// Build the plant tree from instance records.
///
/// Connection passes run in `cfg.pass_order`; a child claimed by one pass is
/// not offered to later passes. Records must have dense IDs `0..k` and share
/// the depth image's dimensions.
pub fn assemble_model(
    records: &[InstanceRecord],
    depth: Arc<DepthImage>,
    cam: &CameraIntrinsics,
    cfg: &PipelineConfig,
) -> Result<PlantModel> {
    if !records.iter().any(|r| r.organ_class == OrganClass::MainCordon) {
        return Err(Error::EmptyModel);
    }
    for (i, r) in records.iter().enumerate() {
        if r.instance_id != i {
            return Err(Error::Usage(format!(
                "instance IDs must be dense and ordered; position {i} holds ID {}",
                r.instance_id
            )));
        }
        depth.check_dimensions(r.mask.width(), r.mask.height())?;
    }

    let of_class = |c: OrganClass| records.iter().filter(move |r| r.organ_class == c);
    let mut claimed: BTreeMap<usize, Connection> = BTreeMap::new();
    for &pair in &cfg.pass_order {
        let parents: Vec<&InstanceRecord> = of_class(pair.parent()).collect();
        let children: Vec<&InstanceRecord> =
            of_class(pair.child()).filter(|r| !claimed.contains_key(&r.instance_id)).collect();
        if parents.is_empty() || children.is_empty() {
            continue;
        }
        let shape = if pair == ConnectionPair::CaneNode { ChildShape::BoundingBox } else { ChildShape::Mask };
        claimed.extend(compute_connections(&parents, &children, &cfg.connection(pair), shape));
    }

    let mut items: Vec<GrapevineItem> = records
        .iter()
        .map(|r| {
            let conn = claimed.get(&r.instance_id);
            let g = derive_geometry(r, conn.map(|c| c.intersection.as_slice()), &depth, cam, cfg);
            GrapevineItem {
                instance: r.clone(),
                origin_px: g.origin_px,
                endpoint_px: g.endpoint_px,
                origin_3d: g.origin_3d,
                endpoint_3d: g.endpoint_3d,
                parent: conn.map(|c| c.parent_id),
                children: Vec::new(),
                distance_from_parent: 0.0,
                link: conn.map(|c| c.info),
                flags: g.flags,
            }
        })
        .collect();

    for (&child, conn) in &claimed {
        items[child].distance_from_parent = items[conn.parent_id].origin_px.distance(items[child].origin_px);
        items[conn.parent_id].children.push(child);
    }
    let dist: Vec<f64> = items.iter().map(|it| it.distance_from_parent).collect();
    for it in &mut items {
        it.children.sort_by(|a, b| dist[*a].total_cmp(&dist[*b]).then(a.cmp(b)));
    }

    let mut roots: Vec<usize> =
        items.iter().filter(|it| it.class() == OrganClass::MainCordon).map(|it| it.id()).collect();
    roots.sort_by(|a, b| items[*a].origin_px.x.total_cmp(&items[*b].origin_px.x).then(a.cmp(b)));
    let orphans = items
        .iter()
        .filter(|it| it.class() != OrganClass::MainCordon && it.parent.is_none())
        .map(|it| it.id())
        .collect();

    let (width, height) = (depth.width(), depth.height());
    Ok(PlantModel { items, roots, orphans, scene: Scene { width, height, intrinsics: *cam, depth } })
}
