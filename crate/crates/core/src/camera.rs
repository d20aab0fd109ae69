//! Pinhole camera model.

use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::Point2;

/// Pinhole intrinsics plus the metric scale of stored depth units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    /// Meters per stored depth unit.
    pub depth_scale: f64,
}

impl CameraIntrinsics {
    pub fn validate(&self) -> Result<()> {
        let positive = |key: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::config(key, format!("must be > 0, got {v}")))
            }
        };
        positive("camera.fx", self.fx)?;
        positive("camera.fy", self.fy)?;
        positive("camera.depth_scale", self.depth_scale)?;
        if !self.cx.is_finite() || !self.cy.is_finite() {
            return Err(Error::config("camera.cx", "principal point must be finite"));
        }
        Ok(())
    }
}

/// Camera-frame point in meters (x right, y down, z forward).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn norm(self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn distance(self, other: Point3) -> f64 {
        (self - other).norm()
    }
}

impl Add for Point3 {
    type Output = Point3;
    fn add(self, o: Point3) -> Point3 {
        Point3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Point3 {
    type Output = Point3;
    fn sub(self, o: Point3) -> Point3 {
        Point3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<Point3> for f64 {
    type Output = Point3;
    fn mul(self, p: Point3) -> Point3 {
        Point3::new(self * p.x, self * p.y, self * p.z)
    }
}

/// Back-project an image position at metric depth into the camera frame.
pub fn deproject(pixel: Point2, depth_m: f64, cam: &CameraIntrinsics) -> Result<Point3> {
    if !(depth_m.is_finite() && depth_m > 0.0) {
        return Err(Error::Depth(format!("non-positive depth {depth_m} m")));
    }
    Ok(Point3::new((pixel.x - cam.cx) * depth_m / cam.fx, (pixel.y - cam.cy) * depth_m / cam.fy, depth_m))
}

/// Project a camera-frame point to image coordinates. Requires `z > 0`.
pub fn project(p: Point3, cam: &CameraIntrinsics) -> Option<Point2> {
    (p.z > 0.0).then(|| Point2::new(p.x * cam.fx / p.z + cam.cx, p.y * cam.fy / p.z + cam.cy))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cam() -> CameraIntrinsics {
        CameraIntrinsics { fx: 100.0, fy: 100.0, cx: 32.0, cy: 24.0, depth_scale: 0.001 }
    }

    #[test]
    fn principal_point_maps_to_axis() {
        let p = deproject(Point2::new(32.0, 24.0), 1.0, &cam()).unwrap();
        assert_eq!(p, Point3::new(0.0, 0.0, 1.0));
    }

    #[test]
    fn lateral_offset_scales_with_depth() {
        let p = deproject(Point2::new(82.0, 24.0), 2.0, &cam()).unwrap();
        assert_eq!(p.x, 1.0);
    }

    #[test]
    fn zero_depth_rejected() {
        assert!(matches!(deproject(Point2::new(0.0, 0.0), 0.0, &cam()), Err(Error::Depth(_))));
    }
}
