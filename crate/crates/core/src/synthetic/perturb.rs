use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::instance::{rect_ring, InstanceRecord, OrganClass};
use crate::mask::{BBox, Mask};

use super::generate::SceneBundle;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum PerturbOp {
    /// Remove a band across one instance's major axis, starting `at` (a
    /// fraction of its extent, measured from the top or left).
    EraseBand { instance: usize, at: f64, width_px: u32 },
    /// Erase a band of `width_px` at a random position on each non-cordon
    /// instance, independently with probability `fraction`.
    Occlude { fraction: f64, width_px: u32 },
    /// Add zero-mean Gaussian noise to every valid depth reading.
    DepthNoise { sigma_m: f64 },
}

/// Apply `ops` in order. Ground truth is kept unchanged for scoring; instance
/// IDs and classes never change, so an erased instance keeps all its pieces.
pub fn perturb(bundle: &SceneBundle, ops: &[PerturbOp], seed: u64) -> SceneBundle {
    let mut out = bundle.clone();
    if ops.is_empty() {
        return out;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0ff5);
    for op in ops {
        match *op {
            PerturbOp::EraseBand { instance, at, width_px } => {
                if let Some(r) = out.records.get_mut(instance) {
                    erase_band(r, at, width_px);
                }
            }
            PerturbOp::Occlude { fraction, width_px } => {
                for r in &mut out.records {
                    if r.organ_class == OrganClass::MainCordon || !rng.random_bool(fraction.clamp(0.0, 1.0)) {
                        continue;
                    }
                    let at = rng.random_range(0.0..1.0);
                    erase_band(r, at, width_px);
                }
            }
            PerturbOp::DepthNoise { sigma_m } => {
                let Ok(normal) = Normal::new(0.0, sigma_m / bundle.intrinsics.depth_scale) else {
                    continue;
                };
                let mut depth = (*out.depth).clone();
                for y in 0..depth.height() {
                    for x in 0..depth.width() {
                        let v = depth.get(x, y);
                        if v != 0 {
                            let noisy = (v as f64 + normal.sample(&mut rng)).round();
                            depth.set(x, y, noisy.clamp(1.0, u16::MAX as f64) as u16);
                        }
                    }
                }
                out.depth = Arc::new(depth);
            }
        }
    }
    out
}

/// Remove a band of `width_px` lines across `r`'s major axis. The record
/// is left untouched when the band would remove every pixel.
fn erase_band(r: &mut InstanceRecord, at: f64, width_px: u32) {
    if width_px == 0 {
        return;
    }
    let b = r.bbox;
    let vertical = b.is_vertical();
    let (start, extent) = if vertical { (b.y0, b.height()) } else { (b.x0, b.width()) };
    let offset = ((at.clamp(0.0, 1.0) * extent as f64) as u32).min(extent - 1);
    let lo = start + offset;
    let hi = lo.saturating_add(width_px - 1);
    let kept = r.mask.retain(|p| {
        let c = if vertical { p.y } else { p.x };
        c < lo || c > hi
    });
    if kept.is_empty() {
        return;
    }
    r.polygons = mask_to_rects(&kept).into_iter().map(rect_ring).collect();
    r.bbox = kept.bbox().expect("non-empty");
    r.mask = kept;
}

/// Cover `mask` exactly with inclusive rectangles: runs per row, merged down
/// while consecutive rows repeat the same run.
pub fn mask_to_rects(mask: &Mask) -> Vec<BBox> {
    let Some(bb) = mask.bbox() else { return Vec::new() };
    let mut open: Vec<BBox> = Vec::new();
    let mut done = Vec::new();
    for y in bb.y0..=bb.y1 {
        let cols = mask.row(y);
        let mut runs: Vec<(u32, u32)> = Vec::new();
        for c in cols {
            match runs.last_mut() {
                Some((_, e)) if *e + 1 == c => *e = c,
                _ => runs.push((c, c)),
            }
        }
        let mut next = Vec::new();
        for (s, e) in runs {
            match open.iter().position(|r| r.x0 == s && r.x1 == e && r.y1 + 1 == y) {
                Some(i) => {
                    let mut r = open.swap_remove(i);
                    r.y1 = y;
                    next.push(r);
                }
                None => next.push(BBox::new(s, y, e, y)),
            }
        }
        done.append(&mut open);
        open = next;
    }
    done.extend(open);
    done.sort_by_key(|r| (r.y0, r.x0));
    done
}
