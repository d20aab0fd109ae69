//! Binary instance masks and polygon rasterization.
//!
//! A [`Mask`] is stored as a tight window over a full scene frame, so a thin
//! cane in a 4608x3456 photo costs only its own bounding box. Windows are
//! always trimmed to the set pixels, which makes structural equality the same
//! as pixel-set equality.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const EDGE_EPS: f64 = 1e-9;

/// Integer pixel coordinate (column `x`, row `y`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Pixel {
    pub x: u32,
    pub y: u32,
}

impl Pixel {
    pub const fn new(x: u32, y: u32) -> Self {
        Self { x, y }
    }

    pub fn to_point(self) -> Point2 {
        Point2::new(self.x as f64, self.y as f64)
    }
}

/// Sub-pixel image position, `x` right and `y` down.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Nearest pixel, clamped into a `width` x `height` frame.
    pub fn round_clamped(self, width: u32, height: u32) -> Pixel {
        let x = self.x.round().clamp(0.0, width.saturating_sub(1) as f64);
        let y = self.y.round().clamp(0.0, height.saturating_sub(1) as f64);
        Pixel::new(x as u32, y as u32)
    }
}

/// Inclusive pixel rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BBox {
    pub x0: u32,
    pub y0: u32,
    pub x1: u32,
    pub y1: u32,
}

impl BBox {
    pub const fn new(x0: u32, y0: u32, x1: u32, y1: u32) -> Self {
        Self { x0, y0, x1, y1 }
    }

    pub fn width(&self) -> u32 {
        self.x1 - self.x0 + 1
    }

    pub fn height(&self) -> u32 {
        self.y1 - self.y0 + 1
    }

    pub fn contains(&self, p: Pixel) -> bool {
        p.x >= self.x0 && p.x <= self.x1 && p.y >= self.y0 && p.y <= self.y1
    }

    pub fn union(&self, other: &BBox) -> BBox {
        BBox::new(self.x0.min(other.x0), self.y0.min(other.y0), self.x1.max(other.x1), self.y1.max(other.y1))
    }

    /// True when the box is taller than wide (ties count as vertical).
    pub fn is_vertical(&self) -> bool {
        self.height() >= self.width()
    }
}

/// Binary raster over a `width` x `height` frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    width: u32,
    height: u32,
    window: Option<BBox>,
    bits: Vec<bool>,
}

impl Mask {
    pub fn empty(width: u32, height: u32) -> Self {
        Self { width, height, window: None, bits: Vec::new() }
    }

    /// Every pixel of `rect` (clipped to the frame) set.
    pub fn from_rect(width: u32, height: u32, rect: BBox) -> Self {
        if width == 0 || height == 0 || rect.x0 >= width || rect.y0 >= height {
            return Self::empty(width, height);
        }
        let rect = BBox::new(rect.x0, rect.y0, rect.x1.min(width - 1), rect.y1.min(height - 1));
        let n = (rect.width() * rect.height()) as usize;
        Self { width, height, window: Some(rect), bits: vec![true; n] }
    }

    pub fn full(width: u32, height: u32) -> Self {
        if width == 0 || height == 0 {
            return Self::empty(width, height);
        }
        Self::from_rect(width, height, BBox::new(0, 0, width - 1, height - 1))
    }

    /// Build from an arbitrary pixel collection; out-of-frame pixels are dropped.
    pub fn from_pixels<I: IntoIterator<Item = Pixel>>(width: u32, height: u32, pixels: I) -> Self {
        let inside: Vec<Pixel> = pixels.into_iter().filter(|p| p.x < width && p.y < height).collect();
        let Some(window) = tight_box(inside.iter().copied()) else {
            return Self::empty(width, height);
        };
        let mut bits = vec![false; (window.width() * window.height()) as usize];
        for p in &inside {
            bits[((p.y - window.y0) * window.width() + (p.x - window.x0)) as usize] = true;
        }
        Self { width, height, window: Some(window), bits }
    }

    /// Build from a window buffer; the result is trimmed.
    fn from_window(width: u32, height: u32, window: BBox, bits: Vec<bool>) -> Self {
        let ww = window.width();
        let set = bits.iter().enumerate().filter(|(_, b)| **b).map(|(i, _)| {
            let i = i as u32;
            Pixel::new(window.x0 + i % ww, window.y0 + i / ww)
        });
        match tight_box(set) {
            None => Self::empty(width, height),
            Some(tight) if tight == window => Self { width, height, window: Some(window), bits },
            Some(tight) => {
                let tw = tight.width();
                let mut out = vec![false; (tw * tight.height()) as usize];
                for y in tight.y0..=tight.y1 {
                    for x in tight.x0..=tight.x1 {
                        out[((y - tight.y0) * tw + (x - tight.x0)) as usize] =
                            bits[((y - window.y0) * ww + (x - window.x0)) as usize];
                    }
                }
                Self { width, height, window: Some(tight), bits: out }
            }
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    /// Tight bounding box of the set pixels.
    pub fn bbox(&self) -> Option<BBox> {
        self.window
    }

    pub fn is_empty(&self) -> bool {
        self.window.is_none()
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        match self.window {
            Some(w) if w.contains(Pixel::new(x, y)) => self.bits[((y - w.y0) * w.width() + (x - w.x0)) as usize],
            _ => false,
        }
    }

    pub fn contains(&self, p: Pixel) -> bool {
        self.get(p.x, p.y)
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    /// Set pixels in row-major order.
    pub fn pixels(&self) -> impl Iterator<Item = Pixel> + '_ {
        let w = self.window;
        self.bits.iter().enumerate().filter(|(_, b)| **b).map(move |(i, _)| {
            let w = w.expect("non-empty bits imply a window");
            let i = i as u32;
            Pixel::new(w.x0 + i % w.width(), w.y0 + i / w.width())
        })
    }

    /// Set pixels of row `y`, ascending by column.
    pub fn row(&self, y: u32) -> Vec<u32> {
        match self.window {
            Some(w) if y >= w.y0 && y <= w.y1 => (w.x0..=w.x1).filter(|&x| self.get(x, y)).collect(),
            _ => Vec::new(),
        }
    }

    /// Set pixels of column `x`, ascending by row.
    pub fn column(&self, x: u32) -> Vec<u32> {
        match self.window {
            Some(w) if x >= w.x0 && x <= w.x1 => (w.y0..=w.y1).filter(|&y| self.get(x, y)).collect(),
            _ => Vec::new(),
        }
    }

    /// Keep only the pixels for which `keep` returns true.
    pub fn retain<F: Fn(Pixel) -> bool>(&self, keep: F) -> Mask {
        let Some(w) = self.window else {
            return self.clone();
        };
        let bits = self
            .bits
            .iter()
            .enumerate()
            .map(|(i, b)| {
                let i = i as u32;
                *b && keep(Pixel::new(w.x0 + i % w.width(), w.y0 + i / w.width()))
            })
            .collect();
        Mask::from_window(self.width, self.height, w, bits)
    }

    pub fn union(&self, other: &Mask) -> Mask {
        let window = match (self.window, other.window) {
            (None, _) => return other.clone(),
            (_, None) => return self.clone(),
            (Some(a), Some(b)) => a.union(&b),
        };
        let ww = window.width();
        let mut bits = vec![false; (ww * window.height()) as usize];
        for p in self.pixels().chain(other.pixels()) {
            bits[((p.y - window.y0) * ww + (p.x - window.x0)) as usize] = true;
        }
        Mask::from_window(self.width, self.height, window, bits)
    }

    /// Mask of this mask's bounding box, fully set.
    pub fn bbox_mask(&self) -> Mask {
        match self.window {
            None => self.clone(),
            Some(w) => Mask::from_rect(self.width, self.height, w),
        }
    }

    /// Centroid of the set pixels.
    pub fn centroid(&self) -> Option<Point2> {
        centroid(self.pixels())
    }

    /// Raw window access for raster kernels in this crate.
    pub(crate) fn window_bits(&self) -> Option<(BBox, &[bool])> {
        self.window.map(|w| (w, self.bits.as_slice()))
    }

    pub(crate) fn from_window_bits(width: u32, height: u32, window: BBox, bits: Vec<bool>) -> Mask {
        Mask::from_window(width, height, window, bits)
    }
}

/// Mean position of a pixel collection.
pub fn centroid<I: IntoIterator<Item = Pixel>>(pixels: I) -> Option<Point2> {
    let (mut sx, mut sy, mut n) = (0.0, 0.0, 0usize);
    for p in pixels {
        sx += p.x as f64;
        sy += p.y as f64;
        n += 1;
    }
    (n > 0).then(|| Point2::new(sx / n as f64, sy / n as f64))
}

/// Tight bounding box of a pixel collection.
pub fn tight_box<I: IntoIterator<Item = Pixel>>(pixels: I) -> Option<BBox> {
    pixels.into_iter().fold(None, |acc: Option<BBox>, p| {
        Some(match acc {
            None => BBox::new(p.x, p.y, p.x, p.y),
            Some(b) => b.union(&BBox::new(p.x, p.y, p.x, p.y)),
        })
    })
}

/// Rasterize closed polygon rings into a mask, inclusive of the boundary.
///
/// A pixel `(x, y)` is sampled at the lattice point `(x, y)`; it is set when
/// that point lies strictly inside a ring (even-odd rule) or exactly on one of
/// its edges. Multiple rings are unioned. Rings need at least three vertices.
pub fn rasterize_polygons(rings: &[Vec<[f64; 2]>], width: u32, height: u32) -> Result<Mask> {
    let mut out = Mask::empty(width, height);
    for ring in rings {
        if ring.len() < 3 {
            return Err(Error::Geometry(format!("polygon ring has {} vertices, need at least 3", ring.len())));
        }
        if ring.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Geometry("polygon has non-finite coordinates".into()));
        }
        out = out.union(&rasterize_ring(ring, width, height));
    }
    Ok(out)
}

fn rasterize_ring(ring: &[[f64; 2]], width: u32, height: u32) -> Mask {
    if width == 0 || height == 0 {
        return Mask::empty(width, height);
    }
    let (mut min_x, mut min_y, mut max_x, mut max_y) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
    for &[x, y] in ring {
        min_x = min_x.min(x);
        min_y = min_y.min(y);
        max_x = max_x.max(x);
        max_y = max_y.max(y);
    }
    let clip = |lo: f64, hi: f64, limit: u32| -> Option<(u32, u32)> {
        let lo = (lo - EDGE_EPS).ceil().max(0.0);
        let hi = (hi + EDGE_EPS).floor().min(limit as f64 - 1.0);
        (lo <= hi).then_some((lo as u32, hi as u32))
    };
    let (Some((wx0, wx1)), Some((wy0, wy1))) = (clip(min_x, max_x, width), clip(min_y, max_y, height)) else {
        return Mask::empty(width, height);
    };
    let window = BBox::new(wx0, wy0, wx1, wy1);
    let ww = window.width();
    let mut bits = vec![false; (ww * window.height()) as usize];
    let mut mark = |x: i64, y: i64| {
        if x >= wx0 as i64 && x <= wx1 as i64 && y >= wy0 as i64 && y <= wy1 as i64 {
            bits[((y as u32 - wy0) * ww + (x as u32 - wx0)) as usize] = true;
        }
    };
    let edges: Vec<([f64; 2], [f64; 2])> = (0..ring.len()).map(|i| (ring[i], ring[(i + 1) % ring.len()])).collect();

    // Interior: even-odd crossings with the half-open rule on each scanline.
    let mut xs = Vec::new();
    for y in wy0..=wy1 {
        let yf = y as f64;
        xs.clear();
        for &([ax, ay], [bx, by]) in &edges {
            if (ay <= yf && yf < by) || (by <= yf && yf < ay) {
                xs.push(ax + (yf - ay) * (bx - ax) / (by - ay));
            }
        }
        xs.sort_by(f64::total_cmp);
        for pair in xs.chunks_exact(2) {
            let lo = (pair[0] - EDGE_EPS).ceil() as i64;
            let hi = (pair[1] + EDGE_EPS).floor() as i64;
            for x in lo..=hi {
                mark(x, y as i64);
            }
        }
    }

    // Boundary: every lattice point lying on an edge.
    for &([ax, ay], [bx, by]) in &edges {
        if (ay - by).abs() < EDGE_EPS {
            if (ay - ay.round()).abs() < EDGE_EPS {
                let lo = (ax.min(bx) - EDGE_EPS).ceil() as i64;
                let hi = (ax.max(bx) + EDGE_EPS).floor() as i64;
                for x in lo..=hi {
                    mark(x, ay.round() as i64);
                }
            }
            continue;
        }
        let lo = (ay.min(by) - EDGE_EPS).ceil() as i64;
        let hi = (ay.max(by) + EDGE_EPS).floor() as i64;
        for y in lo..=hi {
            let x = ax + (y as f64 - ay) * (bx - ax) / (by - ay);
            if (x - x.round()).abs() < EDGE_EPS {
                mark(x.round() as i64, y);
            }
        }
    }
    Mask::from_window(width, height, window, bits)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> Vec<[f64; 2]> {
        vec![[10.0, 10.0], [20.0, 10.0], [20.0, 20.0], [10.0, 20.0]]
    }

    #[test]
    fn square_is_inclusive() {
        let m = rasterize_polygons(&[square()], 64, 64).unwrap();
        assert_eq!(m.count(), 121);
        assert_eq!(m.bbox(), Some(BBox::new(10, 10, 20, 20)));
    }

    #[test]
    fn degenerate_ring_rejected() {
        let err = rasterize_polygons(&[vec![[0.0, 0.0], [5.0, 5.0]]], 8, 8).unwrap_err();
        assert!(matches!(err, Error::Geometry(_)));
    }

    #[test]
    fn ring_is_clipped_to_frame() {
        let ring = vec![[-5.0, -5.0], [3.0, -5.0], [3.0, 3.0], [-5.0, 3.0]];
        let m = rasterize_polygons(&[ring], 8, 8).unwrap();
        assert_eq!(m.count(), 16);
        assert_eq!(m.bbox(), Some(BBox::new(0, 0, 3, 3)));
    }

    #[test]
    fn triangle_diagonal_edge_counts() {
        // Right triangle with the hypotenuse through lattice points.
        let ring = vec![[0.0, 0.0], [4.0, 0.0], [0.0, 4.0]];
        let m = rasterize_polygons(&[ring], 8, 8).unwrap();
        assert_eq!(m.count(), 5 + 4 + 3 + 2 + 1);
        assert!(m.get(2, 2));
        assert!(!m.get(3, 2));
    }

    #[test]
    fn retain_trims_window() {
        let m = Mask::from_rect(32, 32, BBox::new(2, 2, 9, 9));
        let left = m.retain(|p| p.x < 4);
        assert_eq!(left.bbox(), Some(BBox::new(2, 2, 3, 9)));
        assert_eq!(left.count(), 16);
        assert!(m.retain(|_| false).is_empty());
    }

    #[test]
    fn union_and_equality() {
        let a = Mask::from_rect(16, 16, BBox::new(0, 0, 3, 3));
        let b = Mask::from_rect(16, 16, BBox::new(2, 2, 5, 5));
        let u = a.union(&b);
        assert_eq!(u.count(), 16 + 16 - 4);
        let again = Mask::from_pixels(16, 16, u.pixels().collect::<Vec<_>>());
        assert_eq!(u, again);
    }
}
