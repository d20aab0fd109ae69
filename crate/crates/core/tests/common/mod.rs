#![allow(dead_code)]

use std::sync::Arc;

use vinecut_core::instance::rect_ring;
use vinecut_core::*;

pub fn cam(fx: f64) -> CameraIntrinsics {
    CameraIntrinsics { fx, fy: fx, cx: 100.0, cy: 100.0, depth_scale: 0.001 }
}

pub fn rect(id: usize, class: OrganClass, (x0, y0, x1, y1): Rect, w: u32, h: u32) -> InstanceRecord {
    InstanceRecord::from_polygons(id, class, vec![rect_ring(BBox::new(x0, y0, x1, y1))], w, h).unwrap()
}

/// Inclusive `(x0, y0, x1, y1)` pixel rectangle.
pub type Rect = (u32, u32, u32, u32);

/// Assemble rectangles on a `w` x `h` canvas at uniform depth.
pub fn model_of(rects: &[(OrganClass, Rect)], w: u32, h: u32, depth_mm: u16, cfg: &PipelineConfig) -> PlantModel {
    let records: Vec<_> = rects.iter().enumerate().map(|(i, (c, r))| rect(i, *c, *r, w, h)).collect();
    let depth = Arc::new(DepthImage::filled(w, h, depth_mm));
    assemble_model(&records, depth, &cam(1000.0), cfg).unwrap()
}
