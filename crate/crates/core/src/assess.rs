//! Per-region assessments: location on the cordon, cane count, basal-cane
//! growth direction and vigor, origin, and distance to neighbouring regions.

use serde::Serialize;
use serde_json::{json, Value};

use crate::camera::{deproject, CameraIntrinsics, Point3};
use crate::config::{AdjacencyMetric, PipelineConfig};
use crate::depth::{estimate_real_depth, DepthImage};
use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::instance::OrganClass;
use crate::json::num;
use crate::mask::Point2;
use crate::model::{GrapevineItem, PlantModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Location {
    Dorsal,
    Ventral,
    Intermediate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GrowthDirection {
    Vertical,
    NotVertical,
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AssessmentFlag {
    /// Region column lies outside the cordon; the nearest cordon column was used.
    CordonColumnOutside,
    /// Cordon column empty; diameter taken from nearby columns.
    CordonColumnOccluded,
    NoBasalCane,
    VigorUnknown,
    /// Region origin has no 3D position; adjacency distance is infinite.
    OriginMissing3d,
}

/// A child of a main cordon together with the cane that carries its growth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PruningRegion {
    pub item: usize,
    pub cordon: usize,
    pub basal_cane: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionAssessment {
    pub location: Location,
    pub cane_count: usize,
    pub growth: GrowthDirection,
    pub vigor_m: Option<f64>,
    pub is_new: bool,
    pub is_replacement: bool,
    pub adjacent_distance_m: f64,
    pub flags: Vec<AssessmentFlag>,
}

/// Location of a region row `y_pr` against a cordon column whose first set
/// row is `y` and whose diameter is `d_mc` pixels.
pub fn location_from_column(y_pr: f64, y: f64, d_mc: f64, alpha_v: f64, alpha_d: f64) -> Location {
    let (dorsal, ventral) = location_thresholds(y, d_mc, alpha_v, alpha_d);
    if y_pr < dorsal {
        Location::Dorsal
    } else if y_pr > ventral {
        Location::Ventral
    } else {
        Location::Intermediate
    }
}

/// `(dorsal, ventral)` row thresholds; dorsal <= ventral whenever both angles lie in (0, pi].
pub fn location_thresholds(y: f64, d_mc: f64, alpha_v: f64, alpha_d: f64) -> (f64, f64) {
    let half = d_mc / 2.0;
    let dorsal = y + half * (1.0 - (alpha_d / 2.0).cos());
    let ventral = y + d_mc - half * (1.0 - (alpha_v / 2.0).cos());
    (dorsal, ventral)
}

/// Number of cordon columns consulted when the region column is occluded.
const OCCLUDED_COLUMNS: usize = 5;

/// Location of `region_origin` relative to `cordon`'s mask.
pub fn classify_location(
    region_origin: Point2,
    cordon: &GrapevineItem,
    cfg: &PipelineConfig,
) -> (Location, Vec<AssessmentFlag>) {
    let mask = &cordon.instance.mask;
    let bbox = cordon.instance.bbox;
    let mut flags = Vec::new();
    let x = region_origin.x.round().max(0.0) as i64;
    let x_pr = x.clamp(bbox.x0 as i64, bbox.x1 as i64) as u32;
    if x_pr as i64 != x {
        flags.push(AssessmentFlag::CordonColumnOutside);
    }

    let column = mask.column(x_pr);
    let (y, d_mc) = if !column.is_empty() {
        (column[0] as f64, column.len() as f64)
    } else {
        flags.push(AssessmentFlag::CordonColumnOccluded);
        let mut cols: Vec<(u32, Vec<u32>)> =
            (bbox.x0..=bbox.x1).map(|c| (c, mask.column(c))).filter(|(_, rows)| !rows.is_empty()).collect();
        cols.sort_by_key(|(c, _)| (c.abs_diff(x_pr), *c));
        cols.truncate(OCCLUDED_COLUMNS);
        let mut counts: Vec<usize> = cols.iter().map(|(_, rows)| rows.len()).collect();
        counts.sort_unstable();
        let n = counts.len();
        let d = if n % 2 == 1 { counts[n / 2] as f64 } else { (counts[n / 2 - 1] + counts[n / 2]) as f64 / 2.0 };
        (cols[0].1[0] as f64, d)
    };
    (location_from_column(region_origin.y, y, d_mc, cfg.alpha_v, cfg.alpha_d), flags)
}

/// Cane-class items in the subtree rooted at `id`, inclusive.
pub fn count_canes(model: &PlantModel, id: usize) -> usize {
    let mut stack = vec![id];
    let mut n = 0;
    while let Some(cur) = stack.pop() {
        let it = model.item(cur);
        if it.class() == OrganClass::Cane {
            n += 1;
        }
        stack.extend(&it.children);
    }
    n
}

/// Shallowest cane in the subtree of `id`; among equally deep canes the one
/// nearest its parent, then the lower ID.
pub fn basal_cane(model: &PlantModel, id: usize) -> Option<usize> {
    let mut best: Option<(usize, f64, usize)> = None;
    let mut stack = vec![(id, 0usize)];
    while let Some((cur, level)) = stack.pop() {
        let it = model.item(cur);
        if it.class() == OrganClass::Cane {
            let key = (level, it.distance_from_parent, cur);
            let better = best.is_none_or(|b| key.0.cmp(&b.0).then(key.1.total_cmp(&b.1)).then(key.2.cmp(&b.2)).is_lt());
            if better {
                best = Some(key);
            }
            continue;
        }
        stack.extend(it.children.iter().map(|c| (*c, level + 1)));
    }
    best.map(|b| b.2)
}

/// Vertical when both lateral and cross slopes relative to the vertical
/// extent are within their limits. No vertical extent means not vertical.
pub fn classify_growth_direction(
    origin: Option<Point3>,
    endpoint: Option<Point3>,
    alpha_l: f64,
    alpha_c: f64,
) -> GrowthDirection {
    let (Some(o), Some(e)) = (origin, endpoint) else {
        return GrowthDirection::Unknown;
    };
    let dy = (o.y - e.y).abs();
    if dy == 0.0 {
        return GrowthDirection::NotVertical;
    }
    let lateral = (o.x - e.x).abs() / dy;
    let cross = (o.z - e.z).abs() / dy;
    if lateral <= alpha_l && cross <= alpha_c {
        GrowthDirection::Vertical
    } else {
        GrowthDirection::NotVertical
    }
}

/// Mean metric thickness of a cane across its rows (columns when the box is
/// wider than tall). Lines without usable depth are skipped; `None` when no
/// line has depth.
pub fn estimate_vigor(
    cane: &GrapevineItem,
    depth: &DepthImage,
    cam: &CameraIntrinsics,
    cfg: &PipelineConfig,
) -> Option<f64> {
    let mask = &cane.instance.mask;
    let bbox = cane.instance.bbox;
    let vertical = bbox.is_vertical();
    let lines = if vertical { bbox.y0..=bbox.y1 } else { bbox.x0..=bbox.x1 };
    let mut total = 0.0;
    let mut n = 0usize;
    for line in lines {
        let across = if vertical { mask.row(line) } else { mask.column(line) };
        let (Some(&lo), Some(&hi)) = (across.first(), across.last()) else {
            continue;
        };
        let mean = across.iter().map(|v| *v as f64).sum::<f64>() / across.len() as f64;
        let at = |a: f64| if vertical { Point2::new(a, line as f64) } else { Point2::new(line as f64, a) };
        let probe = at(mean).round_clamped(depth.width(), depth.height());
        let Ok(z) = estimate_real_depth(probe, depth, cam.depth_scale, cfg.depth_window, cfg.correction_max_radius)
        else {
            continue;
        };
        let (Ok(a), Ok(b)) = (deproject(at(lo as f64), z, cam), deproject(at(hi as f64), z, cam)) else {
            continue;
        };
        total += a.distance(b);
        n += 1;
    }
    (n > 0).then(|| total / n as f64)
}

/// `(is_new, is_replacement)` from the parent class of `id`.
pub fn classify_origin(model: &PlantModel, id: usize) -> Result<(bool, bool)> {
    let parent = model.item(id).parent.ok_or_else(|| Error::Assessment(format!("item {id} has no parent")))?;
    let class = model.item(parent).class();
    Ok((class == OrganClass::MainCordon, class == OrganClass::Arm))
}

/// Distance from region `index` to its neighbours in `origins` (sorted along
/// the cordon). A missing neighbour or origin counts as infinitely far.
pub fn adjacent_distance(origins: &[Option<Point3>], index: usize, metric: AdjacencyMetric) -> f64 {
    let Some(p) = origins[index] else {
        return f64::INFINITY;
    };
    let dist =
        |j: Option<usize>| j.and_then(|j| origins.get(j).copied().flatten()).map_or(f64::INFINITY, |q| p.distance(q));
    let prev = dist(index.checked_sub(1));
    let next = dist(Some(index + 1));
    match metric {
        AdjacencyMetric::Max => prev.max(next),
        AdjacencyMetric::Min => prev.min(next),
    }
}

/// Regions of one cordon, ordered by origin column then ID.
pub fn regions_of(model: &PlantModel, cordon: usize) -> Vec<PruningRegion> {
    let mut kids = model.item(cordon).children.clone();
    kids.sort_by(|a, b| model.item(*a).origin_px.x.total_cmp(&model.item(*b).origin_px.x).then(a.cmp(b)));
    kids.into_iter().map(|item| PruningRegion { item, cordon, basal_cane: basal_cane(model, item) }).collect()
}

/// Assess every pruning region of the model, cordon by cordon along each cordon.
pub fn assess_all(model: &PlantModel, cfg: &PipelineConfig, mode: Execution) -> Vec<(PruningRegion, RegionAssessment)> {
    let mut out = Vec::new();
    for &cordon in &model.roots {
        let regions = regions_of(model, cordon);
        let mut assessed = exec::map(mode, &regions, |r| assess_region(model, r, cfg));
        let origins: Vec<Option<Point3>> = regions.iter().map(|r| model.item(r.item).origin_3d).collect();
        for (i, a) in assessed.iter_mut().enumerate() {
            a.adjacent_distance_m = adjacent_distance(&origins, i, cfg.adjacency_metric);
            if origins[i].is_none() {
                a.flags.push(AssessmentFlag::OriginMissing3d);
            }
            a.flags.sort_unstable();
        }
        out.extend(regions.into_iter().zip(assessed));
    }
    out
}

fn assess_region(model: &PlantModel, region: &PruningRegion, cfg: &PipelineConfig) -> RegionAssessment {
    let item = model.item(region.item);
    let (location, mut flags) = classify_location(item.origin_px, model.item(region.cordon), cfg);
    let cane_count = count_canes(model, region.item);
    let (growth, vigor_m) = match region.basal_cane {
        Some(c) => {
            let cane = model.item(c);
            let vigor = estimate_vigor(cane, &model.scene.depth, &model.scene.intrinsics, cfg);
            if vigor.is_none() {
                flags.push(AssessmentFlag::VigorUnknown);
            }
            (classify_growth_direction(cane.origin_3d, cane.endpoint_3d, cfg.alpha_l, cfg.alpha_c), vigor)
        }
        None => {
            flags.push(AssessmentFlag::NoBasalCane);
            (GrowthDirection::Unknown, None)
        }
    };
    // Regions hang from a cordon, so every origin item below has a parent.
    let origin_item = region.basal_cane.unwrap_or(region.item);
    let (is_new, is_replacement) = classify_origin(model, origin_item).unwrap_or((false, false));
    RegionAssessment {
        location,
        cane_count,
        growth,
        vigor_m,
        is_new,
        is_replacement,
        adjacent_distance_m: f64::INFINITY,
        flags,
    }
}

pub fn assessment_json(region: &PruningRegion, a: &RegionAssessment) -> Value {
    json!({
        "region_id": region.item,
        "cordon_id": region.cordon,
        "basal_cane_id": region.basal_cane,
        "location": a.location,
        "cane_count": a.cane_count,
        "growth": a.growth,
        "vigor_m": a.vigor_m.map(num),
        "is_new": a.is_new,
        "is_replacement": a.is_replacement,
        "adjacent_distance_m": num(a.adjacent_distance_m),
        "flags": a.flags,
    })
}
