use std::sync::Arc;

use serde::Serialize;

use crate::assess::{GrowthDirection, Location, PruningRegion, RegionAssessment};
use crate::camera::{deproject, CameraIntrinsics, Point3};
use crate::coco::to_coco_json;
use crate::config::{AdjacencyMetric, ConnectionPair, PipelineConfig, RootSide};
use crate::depth::DepthImage;
use crate::error::{Error, Result};
use crate::instance::{rect_ring, InstanceRecord, OrganClass};
use crate::mask::{BBox, Point2};
use crate::model::{ConnectionInfo, GrapevineItem, PlantModel, Scene};
use crate::rules::{select_cut, CutDecision, CutType};

use super::spec::{Direction, RegionKind, SceneSpec, CARRIER_MARGINS};

/// Rows shared by a child and its parent at the attachment.
pub const OVERLAP_ROWS: u32 = 3;
/// Minimum horizontal gap between the boxes of neighbouring regions.
pub const MIN_REGION_GAP: u32 = 20;

/// Ground truth for one generated organ, indexed like the instance records.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrganTruth {
    pub class: OrganClass,
    pub rect: BBox,
    pub parent: Option<usize>,
    /// Index into `SceneSpec::regions`; `None` for the cordon.
    pub region: Option<usize>,
    pub direction: Direction,
    pub origin: Point2,
    pub endpoint: Point2,
}

/// Expected pruning point, placed on the ideal geometry.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruthPoint {
    pub position: Point2,
    pub cut: CutType,
    pub region_id: usize,
    pub target_item_id: usize,
    pub fallback: bool,
}

#[derive(Debug, Clone)]
pub struct SceneBundle {
    pub spec: SceneSpec,
    pub records: Vec<InstanceRecord>,
    pub depth: Arc<DepthImage>,
    pub intrinsics: CameraIntrinsics,
    pub organs: Vec<OrganTruth>,
    pub truth_tree: PlantModel,
    pub truth_assessments: Vec<(PruningRegion, RegionAssessment)>,
    pub truth_points: Vec<TruthPoint>,
}

impl SceneBundle {
    pub fn to_coco_json(&self) -> Result<String> {
        to_coco_json(&self.records, self.spec.width, self.spec.height, &format!("scene_{}.png", self.spec.seed))
    }

    pub fn depth_png(&self) -> Result<Vec<u8>> {
        self.depth.to_png_bytes()
    }
}

/// Centre of an inclusive pixel rectangle.
fn centre(r: BBox) -> Point2 {
    Point2::new((r.x0 + r.x1) as f64 / 2.0, (r.y0 + r.y1) as f64 / 2.0)
}

fn intersect(a: BBox, b: BBox) -> BBox {
    BBox::new(a.x0.max(b.x0), a.y0.max(b.y0), a.x1.min(b.x1), a.y1.min(b.y1))
}

/// Corner of `r` farthest from `p`; ties go to the first corner in row-major order.
fn farthest_corner(r: BBox, p: Point2) -> Point2 {
    let corners = [(r.x0, r.y0), (r.x1, r.y0), (r.x0, r.y1), (r.x1, r.y1)];
    let mut best = (f64::NEG_INFINITY, Point2::new(0.0, 0.0));
    for (x, y) in corners {
        let c = Point2::new(x as f64, y as f64);
        let d = (c.x - p.x).hypot(c.y - p.y);
        if d > best.0 {
            best = (d, c);
        }
    }
    best.1
}

/// Rectangle `len` rows long attached to `parent` on the `dir` side, overlapping it by [`OVERLAP_ROWS`].
fn attach(parent: BBox, x0: i64, width: u32, len: u32, dir: Direction) -> (i64, i64, i64, i64) {
    let (y0, y1) = match dir {
        Direction::Up => {
            let y1 = parent.y0 as i64 + OVERLAP_ROWS as i64 - 1;
            (y1 - len as i64 + 1, y1)
        }
        Direction::Down => {
            let y0 = parent.y1 as i64 - OVERLAP_ROWS as i64 + 1;
            (y0, y0 + len as i64 - 1)
        }
    };
    (x0, y0, x0 + width as i64 - 1, y1)
}

struct Builder<'a> {
    spec: &'a SceneSpec,
    organs: Vec<OrganTruth>,
}

impl Builder<'_> {
    fn rect(&self, what: &str, (x0, y0, x1, y1): (i64, i64, i64, i64)) -> Result<BBox> {
        let (w, h) = (self.spec.width as i64, self.spec.height as i64);
        if x0 < 0 || y0 < 0 || x1 >= w || y1 >= h || x1 < x0 || y1 < y0 {
            return Err(Error::Spec(format!("{what} spans ({x0}, {y0})-({x1}, {y1}), outside the {w}x{h} canvas")));
        }
        Ok(BBox::new(x0 as u32, y0 as u32, x1 as u32, y1 as u32))
    }

    fn push(&mut self, class: OrganClass, rect: BBox, parent: usize, region: usize, dir: Direction) -> usize {
        let origin = centre(intersect(rect, self.organs[parent].rect));
        self.organs.push(OrganTruth {
            class,
            rect,
            parent: Some(parent),
            region: Some(region),
            direction: dir,
            origin,
            endpoint: farthest_corner(rect, origin),
        });
        self.organs.len() - 1
    }
}

fn validate(spec: &SceneSpec) -> Result<()> {
    let positive = [
        ("width", spec.width),
        ("height", spec.height),
        ("cordon length", spec.cordon.length),
        ("cordon diameter", spec.cordon.diameter),
        ("node size", spec.node_size),
    ];
    for (name, v) in positive {
        if v == 0 {
            return Err(Error::Spec(format!("{name} must be positive")));
        }
    }
    if spec.node_size.is_multiple_of(2) {
        return Err(Error::Spec("node size must be odd".into()));
    }
    if !(spec.plane_depth_m.is_finite() && spec.plane_depth_m > 0.0) {
        return Err(Error::Spec("plane depth must be positive".into()));
    }
    spec.camera.validate()?;
    for (i, r) in spec.regions.iter().enumerate() {
        if r.canes.is_empty() && r.kind == RegionKind::Cane {
            return Err(Error::Spec(format!("region {i}: a cane region needs its cane")));
        }
        if r.kind == RegionKind::Cane && r.canes.len() != 1 {
            return Err(Error::Spec(format!("region {i}: a cane region holds exactly one cane")));
        }
        if r.kind != RegionKind::Cane && r.carrier_length <= 2 * OVERLAP_ROWS {
            return Err(Error::Spec(format!("region {i}: carrier length must exceed {}", 2 * OVERLAP_ROWS)));
        }
        for (j, c) in r.canes.iter().enumerate() {
            if c.width == 0 || c.width % 2 == 0 || c.length == 0 {
                return Err(Error::Spec(format!("region {i} cane {j}: width must be odd and length positive")));
            }
            if c.node_count > 0 && c.node_spacing == 0 {
                return Err(Error::Spec(format!("region {i} cane {j}: node spacing must be positive")));
            }
            if c.node_count * c.node_spacing + spec.node_size / 2 >= c.length {
                return Err(Error::Spec(format!("region {i} cane {j}: nodes do not fit on the cane")));
            }
        }
    }
    Ok(())
}

/// Generate a scene and its ground truth, judged with the default configuration.
pub fn generate_scene(spec: &SceneSpec) -> Result<SceneBundle> {
    generate_scene_with(spec, &PipelineConfig::default())
}

/// Generate a scene; `cfg` supplies the thresholds for the truth assessments
/// and the decision table for the truth points.
pub fn generate_scene_with(spec: &SceneSpec, cfg: &PipelineConfig) -> Result<SceneBundle> {
    validate(spec)?;
    let cam = spec.camera;
    let units = (spec.plane_depth_m / cam.depth_scale).round();
    if !(1.0..=u16::MAX as f64).contains(&units) {
        return Err(Error::Spec("plane depth not representable in 16-bit depth units".into()));
    }
    let z = units * cam.depth_scale;

    let mut b = Builder { spec, organs: Vec::new() };
    let c = &spec.cordon;
    let cordon = b.rect(
        "cordon",
        (c.x0 as i64, c.y0 as i64, c.x0 as i64 + c.length as i64 - 1, c.y0 as i64 + c.diameter as i64 - 1),
    )?;
    let band = cfg.root_band_px.max(1) - 1;
    let root_band = match cfg.root_side {
        RootSide::Left => BBox::new(cordon.x0, cordon.y0, (cordon.x0 + band).min(cordon.x1), cordon.y1),
        RootSide::Right => BBox::new(cordon.x1.saturating_sub(band).max(cordon.x0), cordon.y0, cordon.x1, cordon.y1),
    };
    let cordon_origin = centre(root_band);
    b.organs.push(OrganTruth {
        class: OrganClass::MainCordon,
        rect: cordon,
        parent: None,
        region: None,
        direction: Direction::Up,
        origin: cordon_origin,
        endpoint: farthest_corner(cordon, cordon_origin),
    });

    let ns = spec.node_size;
    let mut extents: Vec<(usize, u32, u32)> = Vec::new();
    for (ri, r) in spec.regions.iter().enumerate() {
        let first_organ = b.organs.len();
        let dir = r.direction;
        let (carrier, cane_parent, mut cane_x) = match r.kind {
            RegionKind::Cane => (None, 0, r.x as i64 - (r.canes[0].width as i64 - 1) / 2),
            kind => {
                let width = r.carrier_width(ns);
                let x0 = r.x as i64 - width as i64 / 2;
                let rect = b.rect(&format!("region {ri} carrier"), attach(cordon, x0, width, r.carrier_length, dir))?;
                if rect.x0 < cordon.x0 || rect.x1 > cordon.x1 {
                    return Err(Error::Spec(format!("region {ri} extends past the cordon ends")));
                }
                let class = if kind == RegionKind::Arm { OrganClass::Arm } else { OrganClass::Spur };
                let id = b.push(class, rect, 0, ri, dir);
                (Some(id), id, x0 + CARRIER_MARGINS.0 as i64)
            }
        };
        if carrier.is_none() && (cane_x < cordon.x0 as i64 || cane_x + r.canes[0].width as i64 - 1 > cordon.x1 as i64) {
            return Err(Error::Spec(format!("region {ri} extends past the cordon ends")));
        }
        for (ci, cs) in r.canes.iter().enumerate() {
            let parent_rect = b.organs[cane_parent].rect;
            let rect =
                b.rect(&format!("region {ri} cane {ci}"), attach(parent_rect, cane_x, cs.width, cs.length, dir))?;
            let cane = b.push(OrganClass::Cane, rect, cane_parent, ri, dir);
            let axis = (rect.x0 + rect.x1) as i64 / 2;
            for j in 1..=cs.node_count as i64 {
                let cy = match dir {
                    Direction::Up => rect.y1 as i64 - j * cs.node_spacing as i64,
                    Direction::Down => rect.y0 as i64 + j * cs.node_spacing as i64,
                };
                let h = ns as i64 / 2;
                let node = b.rect(&format!("region {ri} cane {ci} node {j}"), (axis - h, cy - h, axis + h, cy + h))?;
                b.push(OrganClass::Node, node, cane, ri, dir);
            }
            cane_x += cs.width as i64 + ns as i64;
        }
        let xs = b.organs[first_organ..].iter().map(|o| (o.rect.x0, o.rect.x1));
        let (lo, hi) = xs.fold((u32::MAX, 0), |(lo, hi), (a, z)| (lo.min(a), hi.max(z)));
        extents.push((ri, lo, hi));
    }
    extents.sort_by_key(|e| e.1);
    for w in extents.windows(2) {
        if w[1].1 < w[0].2 + MIN_REGION_GAP {
            return Err(Error::Spec(format!("regions {} and {} are closer than {MIN_REGION_GAP} px", w[0].0, w[1].0)));
        }
    }

    let organs = b.organs;
    let records = organs
        .iter()
        .enumerate()
        .map(|(id, o)| InstanceRecord::from_polygons(id, o.class, vec![rect_ring(o.rect)], spec.width, spec.height))
        .collect::<Result<Vec<_>>>()?;

    let mut depth = DepthImage::filled(spec.width, spec.height, 0);
    for o in &organs {
        for y in o.rect.y0..=o.rect.y1 {
            for x in o.rect.x0..=o.rect.x1 {
                depth.set(x, y, units as u16);
            }
        }
    }
    let depth = Arc::new(depth);

    let truth_tree = truth_tree(&organs, &records, z, &cam, cfg, Arc::clone(&depth), spec);
    let truth_assessments = truth_assessments(&organs, &truth_tree, spec, z, cfg);
    let truth_points = truth_points(&organs, &truth_tree, &truth_assessments, z, &cam, cfg);

    Ok(SceneBundle {
        spec: spec.clone(),
        records,
        depth,
        intrinsics: cam,
        organs,
        truth_tree,
        truth_assessments,
        truth_points,
    })
}

fn lift(p: Point2, z: f64, cam: &CameraIntrinsics) -> Option<Point3> {
    deproject(p, z, cam).ok()
}

fn truth_tree(
    organs: &[OrganTruth],
    records: &[InstanceRecord],
    z: f64,
    cam: &CameraIntrinsics,
    cfg: &PipelineConfig,
    depth: Arc<DepthImage>,
    spec: &SceneSpec,
) -> PlantModel {
    let mut items: Vec<GrapevineItem> = organs
        .iter()
        .zip(records)
        .map(|(o, r)| {
            let distance = o.parent.map_or(0.0, |p| {
                let q = organs[p].origin;
                (q.x - o.origin.x).hypot(q.y - o.origin.y)
            });
            let link = o.parent.map(|p| {
                let pair =
                    ConnectionPair::between(organs[p].class, o.class).expect("generator links follow the class table");
                let fallback = o.direction == Direction::Down && o.class != OrganClass::Node;
                ConnectionInfo { iteration: 0, slot: if fallback { 1 } else { cfg.connection(pair).n_slots }, fallback }
            });
            GrapevineItem {
                instance: r.clone(),
                origin_px: o.origin,
                endpoint_px: o.endpoint,
                origin_3d: lift(o.origin, z, cam),
                endpoint_3d: lift(o.endpoint, z, cam),
                parent: o.parent,
                children: Vec::new(),
                distance_from_parent: distance,
                link,
                flags: Vec::new(),
            }
        })
        .collect();
    for id in 0..items.len() {
        if let Some(p) = items[id].parent {
            items[p].children.push(id);
        }
    }
    let dist: Vec<f64> = items.iter().map(|i| i.distance_from_parent).collect();
    for it in &mut items {
        it.children.sort_by(|a, b| dist[*a].total_cmp(&dist[*b]).then(a.cmp(b)));
    }
    PlantModel {
        items,
        roots: vec![0],
        orphans: Vec::new(),
        scene: Scene { width: spec.width, height: spec.height, intrinsics: *cam, depth },
    }
}

fn truth_assessments(
    organs: &[OrganTruth],
    tree: &PlantModel,
    spec: &SceneSpec,
    z: f64,
    cfg: &PipelineConfig,
) -> Vec<(PruningRegion, RegionAssessment)> {
    let mut regions: Vec<usize> =
        organs.iter().enumerate().filter(|(_, o)| o.parent == Some(0)).map(|(i, _)| i).collect();
    regions.sort_by(|a, b| organs[*a].origin.x.total_cmp(&organs[*b].origin.x).then(a.cmp(b)));

    let cordon = organs[0].rect;
    let y = cordon.y0 as f64;
    let d_mc = cordon.height() as f64;
    let dorsal = y + d_mc / 2.0 * (1.0 - (cfg.alpha_d / 2.0).cos());
    let ventral = y + d_mc - d_mc / 2.0 * (1.0 - (cfg.alpha_v / 2.0).cos());

    let origins: Vec<Point3> =
        regions.iter().map(|r| tree.items[*r].origin_3d.expect("plane depth is valid")).collect();
    regions
        .iter()
        .enumerate()
        .map(|(k, &item)| {
            let o = &organs[item];
            let canes: Vec<usize> = (0..organs.len())
                .filter(|&i| organs[i].class == OrganClass::Cane && organs[i].region == o.region)
                .collect();
            // Canes sit at one depth below the region item, so the nearest to its parent is basal.
            let basal = canes.iter().copied().min_by(|a, b| {
                tree.items[*a].distance_from_parent.total_cmp(&tree.items[*b].distance_from_parent).then(a.cmp(b))
            });
            let location = if o.origin.y < dorsal {
                Location::Dorsal
            } else if o.origin.y > ventral {
                Location::Ventral
            } else {
                Location::Intermediate
            };
            let (growth, vigor_m, is_new, is_replacement) = match basal {
                Some(c) => {
                    let it = &tree.items[c];
                    let (a, e) = (it.origin_3d.unwrap(), it.endpoint_3d.unwrap());
                    let dy = (a.y - e.y).abs();
                    let vertical =
                        dy > 0.0 && (a.x - e.x).abs() / dy <= cfg.alpha_l && (a.z - e.z).abs() / dy <= cfg.alpha_c;
                    let growth = if vertical { GrowthDirection::Vertical } else { GrowthDirection::NotVertical };
                    let width = organs[c].rect.width() as f64;
                    let parent = organs[organs[c].parent.unwrap()].class;
                    (
                        growth,
                        Some((width - 1.0) * z / spec.camera.fx),
                        parent == OrganClass::MainCordon,
                        parent == OrganClass::Arm,
                    )
                }
                // Without a cane the region item itself hangs from the cordon.
                None => (GrowthDirection::Unknown, None, true, false),
            };
            let near =
                |j: Option<usize>| j.and_then(|j| origins.get(j)).map_or(f64::INFINITY, |q| origins[k].distance(*q));
            let (prev, next) = (near(k.checked_sub(1)), near(Some(k + 1)));
            let adjacent_distance_m = match cfg.adjacency_metric {
                AdjacencyMetric::Max => prev.max(next),
                AdjacencyMetric::Min => prev.min(next),
            };
            (
                PruningRegion { item, cordon: 0, basal_cane: basal },
                RegionAssessment {
                    location,
                    cane_count: canes.len(),
                    growth,
                    vigor_m,
                    is_new,
                    is_replacement,
                    adjacent_distance_m,
                    flags: Vec::new(),
                },
            )
        })
        .collect()
}

/// Point `d` meters from `a` towards `b` on a fronto-parallel plane at depth `z`.
fn along(a: Point2, b: Point2, d: f64, z: f64, cam: &CameraIntrinsics) -> Point2 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let metric = z * ((dx / cam.fx).powi(2) + (dy / cam.fy).powi(2)).sqrt();
    if metric == 0.0 {
        return a;
    }
    let f = (d / metric).clamp(0.0, 1.0);
    Point2::new(a.x + f * dx, a.y + f * dy)
}

fn truth_points(
    organs: &[OrganTruth],
    tree: &PlantModel,
    assessed: &[(PruningRegion, RegionAssessment)],
    z: f64,
    cam: &CameraIntrinsics,
    cfg: &PipelineConfig,
) -> Vec<TruthPoint> {
    let nodes_of = |cane: usize| -> Vec<usize> {
        let mut v: Vec<usize> = (0..organs.len()).filter(|&i| organs[i].parent == Some(cane)).collect();
        v.sort_by(|a, b| {
            tree.items[*a].distance_from_parent.total_cmp(&tree.items[*b].distance_from_parent).then(a.cmp(b))
        });
        v
    };
    let d = cfg.cut_offset_d;
    let n = cfg.spur_nodes_n as usize;
    let mut out = Vec::new();
    for (region, a) in assessed {
        let CutDecision::Cut(cut) = select_cut(a, cfg) else { continue };
        let rid = region.item;
        let basal = region.basal_cane.unwrap_or(rid);
        let pt =
            |position, target, fallback| TruthPoint { position, cut, region_id: rid, target_item_id: target, fallback };
        let spur = |out: &mut Vec<TruthPoint>| {
            let nodes = nodes_of(basal);
            let c = &organs[basal];
            if nodes.len() > n {
                let (p, q) = (organs[nodes[n - 1]].origin, organs[nodes[n]].origin);
                out.push(pt(Point2::new((p.x + q.x) / 2.0, (p.y + q.y) / 2.0), basal, false));
            } else {
                out.push(pt(along(c.origin, c.endpoint, d * (n as f64 + 1.0), z, cam), basal, true));
            }
        };
        let parent = |out: &mut Vec<TruthPoint>| {
            if let Some(p) = organs[basal].parent.filter(|p| organs[*p].class != OrganClass::MainCordon) {
                out.push(pt(along(organs[basal].origin, organs[p].endpoint, d, z, cam), p, false));
            }
        };
        match cut {
            CutType::CleanCut => out.push(pt(along(organs[rid].origin, organs[rid].endpoint, d, z, cam), rid, false)),
            CutType::BaseBudCut => {
                let c = &organs[basal];
                let end = nodes_of(basal).first().map_or(c.endpoint, |n| organs[*n].origin);
                out.push(pt(along(c.origin, end, d, z, cam), basal, false));
            }
            CutType::SpurCut => {
                spur(&mut out);
                if !a.is_new && region.basal_cane.is_some() {
                    parent(&mut out);
                }
            }
            CutType::ReplacementCut => {
                spur(&mut out);
                parent(&mut out);
            }
        }
    }
    out
}
