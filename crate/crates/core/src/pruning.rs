//! Pruning-point placement: interpolation along organ segments, cut
//! orientation and snapping onto the target organ.

use serde::Serialize;
use serde_json::{json, Value};

use crate::assess::{assessment_json, PruningRegion, RegionAssessment};
use crate::camera::{deproject, Point3};
use crate::config::PipelineConfig;
use crate::depth::{estimate_real_depth, DepthImage};
use crate::error::{Error, Result};
use crate::instance::OrganClass;
use crate::json::{num, point3};
use crate::mask::{Mask, Pixel, Point2};
use crate::model::{GrapevineItem, PlantModel};
use crate::rules::{select_cut, CutDecision, CutType};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PointFlag {
    /// Too few nodes for a spur cut; placed by offset along the whole cane.
    Fallback,
    /// Requested offset exceeded the segment and was clamped.
    Clamped,
    /// Segment endpoints coincide; placed at the first endpoint.
    DegenerateSegment,
    /// No 3D position for the segment or the final pixel.
    MissingDepth,
    /// No mask or valid-depth pixel within the correction radius.
    CorrectionFailed,
    /// Snapped to valid depth rather than onto the target mask.
    SnappedToDepth,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PruningPoint {
    pub position_px: Pixel,
    pub position_3d: Option<Point3>,
    pub angle_rad: f64,
    pub cut: CutType,
    pub region_id: usize,
    pub target_item_id: usize,
    pub corrected: bool,
    pub flags: Vec<PointFlag>,
}

/// Point `d` meters from `p1` towards `p2`, with `d` clamped to `[0, |p2 - p1|]`.
/// The flag reports whether clamping happened.
pub fn interpolate_pruning_point(p1: Point3, p2: Point3, d: f64) -> Result<(Point3, bool)> {
    let big_d = p1.distance(p2);
    if big_d == 0.0 || !big_d.is_finite() {
        return Err(Error::DegenerateSegment);
    }
    let dc = d.clamp(0.0, big_d);
    let w1 = (big_d - dc).abs() / big_d;
    let w2 = 1.0 - w1;
    Ok((w1 * p1 + w2 * p2, dc != d))
}

/// Cut orientation for the segment `p1 p2`: the angle of the direction
/// perpendicular to it, in `(-pi/2, pi/2]`.
pub fn orientation_angle(p1: Point2, p2: Point2) -> Result<f64> {
    let dx = p1.x - p2.x;
    let dy = p1.y - p2.y;
    if dx == 0.0 && dy == 0.0 {
        return Err(Error::DegenerateSegment);
    }
    Ok(if dx == 0.0 {
        0.0
    } else if dy == 0.0 {
        std::f64::consts::FRAC_PI_2
    } else {
        let t = dy / dx;
        t.atan() - t.signum() * std::f64::consts::FRAC_PI_2
    })
}

/// The four axis-aligned pixels at distance `r`, in +x, -x, +y, -y order.
fn axis_ring(p: Pixel, r: u32, w: u32, h: u32) -> impl Iterator<Item = Pixel> {
    let (x, y, r) = (p.x as i64, p.y as i64, r as i64);
    [(x + r, y), (x - r, y), (x, y + r), (x, y - r)]
        .into_iter()
        .filter(move |&(cx, cy)| cx >= 0 && cy >= 0 && cx < w as i64 && cy < h as i64)
        .map(|(cx, cy)| Pixel::new(cx as u32, cy as u32))
}

/// Move `point` onto `mask`, or failing that onto valid depth, scanning
/// outward one pixel at a time along +x, -x, +y, -y.
///
/// Returns the final pixel and whether it moved.
pub fn correct_onto_organ(point: Pixel, mask: &Mask, depth: &DepthImage, max_radius: u32) -> Result<(Pixel, bool)> {
    if mask.contains(point) {
        return Ok((point, false));
    }
    let (w, h) = (depth.width(), depth.height());
    for r in 1..=max_radius {
        if let Some(p) = axis_ring(point, r, w, h).find(|p| mask.contains(*p)) {
            return Ok((p, true));
        }
    }
    if depth.is_valid(point.x, point.y) {
        return Ok((point, false));
    }
    for r in 1..=max_radius {
        if let Some(p) = axis_ring(point, r, w, h).find(|p| depth.is_valid(p.x, p.y)) {
            return Ok((p, true));
        }
    }
    Err(Error::Correction { x: point.x, y: point.y, radius: max_radius })
}

/// Segment end used for placement.
#[derive(Debug, Clone, Copy)]
struct Anchor {
    px: Point2,
    p3: Option<Point3>,
}

impl Anchor {
    fn origin(it: &GrapevineItem) -> Self {
        Anchor { px: it.origin_px, p3: it.origin_3d }
    }

    fn endpoint(it: &GrapevineItem) -> Self {
        Anchor { px: it.endpoint_px, p3: it.endpoint_3d }
    }
}

#[derive(Debug, Clone, Copy)]
enum Offset {
    Meters(f64),
    Fraction(f64),
}

struct Placement {
    px: Point2,
    p3: Option<Point3>,
    flags: Vec<PointFlag>,
}

/// Place a point along `a b`. Metric offsets are converted with the
/// segment's own 3D length, so the pixel position sits at the same fraction.
fn place(a: Anchor, b: Anchor, offset: Offset) -> Placement {
    let mut flags = Vec::new();
    let lerp = |f: f64| Point2::new(a.px.x + f * (b.px.x - a.px.x), a.px.y + f * (b.px.y - a.px.y));
    let (Some(p1), Some(p2)) = (a.p3, b.p3) else {
        flags.push(PointFlag::MissingDepth);
        let f = match offset {
            Offset::Fraction(f) => f,
            Offset::Meters(_) => 0.0,
        };
        return Placement { px: lerp(f), p3: None, flags };
    };
    let big_d = p1.distance(p2);
    let d = match offset {
        Offset::Meters(d) => d,
        Offset::Fraction(f) => f * big_d,
    };
    match interpolate_pruning_point(p1, p2, d) {
        Ok((p3, clamped)) => {
            if clamped {
                flags.push(PointFlag::Clamped);
            }
            let f = d.clamp(0.0, big_d) / big_d;
            Placement { px: lerp(f), p3: Some(p3), flags }
        }
        Err(_) => {
            flags.push(PointFlag::DegenerateSegment);
            Placement { px: a.px, p3: Some(p1), flags }
        }
    }
}

/// Node children of a cane, nearest its origin first.
fn nodes_of(model: &PlantModel, cane: usize) -> Vec<usize> {
    model.item(cane).children.iter().copied().filter(|c| model.item(*c).class() == OrganClass::Node).collect()
}

struct Ctx<'a> {
    model: &'a PlantModel,
    cfg: &'a PipelineConfig,
}

impl Ctx<'_> {
    #[allow(clippy::too_many_arguments)]
    fn emit(
        &self,
        cut: CutType,
        region: usize,
        target: usize,
        a: Anchor,
        b: Anchor,
        offset: Offset,
        extra: &[PointFlag],
    ) -> PruningPoint {
        let scene = &self.model.scene;
        let placed = place(a, b, offset);
        let mut flags = placed.flags;
        flags.extend_from_slice(extra);
        let angle_rad = orientation_angle(a.px, b.px).unwrap_or_else(|_| {
            flags.push(PointFlag::DegenerateSegment);
            0.0
        });
        let raw = placed.px.round_clamped(scene.width, scene.height);
        let mask = &self.model.item(target).instance.mask;
        let (position_px, corrected, position_3d) =
            match correct_onto_organ(raw, mask, &scene.depth, self.cfg.correction_max_radius) {
                Ok((p, moved)) => {
                    if !mask.contains(p) {
                        flags.push(PointFlag::SnappedToDepth);
                    }
                    let p3 = if moved || placed.p3.is_none() { self.lift(p) } else { placed.p3 };
                    (p, moved, p3)
                }
                Err(_) => {
                    flags.push(PointFlag::CorrectionFailed);
                    (raw, false, placed.p3)
                }
            };
        if position_3d.is_none() && !flags.contains(&PointFlag::MissingDepth) {
            flags.push(PointFlag::MissingDepth);
        }
        flags.sort_unstable();
        flags.dedup();
        PruningPoint {
            position_px,
            position_3d,
            angle_rad,
            cut,
            region_id: region,
            target_item_id: target,
            corrected,
            flags,
        }
    }

    fn lift(&self, p: Pixel) -> Option<Point3> {
        let s = &self.model.scene;
        let z = estimate_real_depth(
            p,
            &s.depth,
            s.intrinsics.depth_scale,
            self.cfg.depth_window,
            self.cfg.correction_max_radius,
        )
        .ok()?;
        deproject(p.to_point(), z, &s.intrinsics).ok()
    }

    /// Spur-cut point on `cane`: midway between nodes N and N+1, or by offset
    /// along the cane when fewer nodes are known.
    fn spur_point(&self, cut: CutType, region: usize, cane: usize) -> PruningPoint {
        let it = self.model.item(cane);
        let n = self.cfg.spur_nodes_n as usize;
        let nodes = nodes_of(self.model, cane);
        if nodes.len() > n {
            let a = Anchor::origin(self.model.item(nodes[n - 1]));
            let b = Anchor::origin(self.model.item(nodes[n]));
            self.emit(cut, region, cane, a, b, Offset::Fraction(0.5), &[])
        } else {
            let d = self.cfg.cut_offset_d * (n as f64 + 1.0);
            self.emit(
                cut,
                region,
                cane,
                Anchor::origin(it),
                Anchor::endpoint(it),
                Offset::Meters(d),
                &[PointFlag::Fallback],
            )
        }
    }

    /// Point on the parent of `cane`, `cut_offset_d` beyond the cane origin.
    fn parent_point(&self, cut: CutType, region: usize, cane: usize) -> Option<PruningPoint> {
        let it = self.model.item(cane);
        let parent = self.model.item(it.parent?);
        if parent.class() == OrganClass::MainCordon {
            return None;
        }
        Some(self.emit(
            cut,
            region,
            parent.id(),
            Anchor::origin(it),
            Anchor::endpoint(parent),
            Offset::Meters(self.cfg.cut_offset_d),
            &[],
        ))
    }

    fn region_points(&self, region: &PruningRegion, a: &RegionAssessment) -> Vec<PruningPoint> {
        let CutDecision::Cut(cut) = select_cut(a, self.cfg) else {
            return Vec::new();
        };
        let rid = region.item;
        let basal = region.basal_cane.unwrap_or(rid);
        let d = Offset::Meters(self.cfg.cut_offset_d);
        match cut {
            CutType::CleanCut => {
                let it = self.model.item(rid);
                vec![self.emit(cut, rid, rid, Anchor::origin(it), Anchor::endpoint(it), d, &[])]
            }
            CutType::BaseBudCut => {
                let it = self.model.item(basal);
                let end = nodes_of(self.model, basal)
                    .first()
                    .map(|n| Anchor::origin(self.model.item(*n)))
                    .unwrap_or(Anchor::endpoint(it));
                vec![self.emit(cut, rid, basal, Anchor::origin(it), end, d, &[])]
            }
            CutType::SpurCut => {
                let mut pts = vec![self.spur_point(cut, rid, basal)];
                if !a.is_new && region.basal_cane.is_some() {
                    pts.extend(self.parent_point(cut, rid, basal));
                }
                pts
            }
            CutType::ReplacementCut => {
                let mut pts = vec![self.spur_point(cut, rid, basal)];
                pts.extend(self.parent_point(cut, rid, basal));
                pts
            }
        }
    }
}

/// Pruning points for every assessed region, in region order.
pub fn generate_pruning_points(
    model: &PlantModel,
    assessments: &[(PruningRegion, RegionAssessment)],
    cfg: &PipelineConfig,
) -> Vec<PruningPoint> {
    let ctx = Ctx { model, cfg };
    assessments.iter().flat_map(|(r, a)| ctx.region_points(r, a)).collect()
}

pub fn point_json(p: &PruningPoint) -> Value {
    json!({
        "position_px": [p.position_px.x, p.position_px.y],
        "position_3d": point3(p.position_3d),
        "angle_rad": num(p.angle_rad),
        "cut_type": p.cut.name(),
        "region_id": p.region_id,
        "target_item_id": p.target_item_id,
        "corrected": p.corrected,
        "flags": p.flags,
    })
}

/// Versioned document holding regions, their assessments and decisions, and
/// the pruning points.
pub fn pruning_document(
    assessments: &[(PruningRegion, RegionAssessment)],
    points: &[PruningPoint],
    cfg: &PipelineConfig,
) -> Value {
    let regions: Vec<Value> = assessments
        .iter()
        .map(|(r, a)| {
            let mut v = assessment_json(r, a);
            v["decision"] = Value::String(select_cut(a, cfg).to_string());
            v
        })
        .collect();
    json!({
        "schema_version": SCHEMA_VERSION,
        "regions": regions,
        "pruning_points": points.iter().map(point_json).collect::<Vec<_>>(),
    })
}
