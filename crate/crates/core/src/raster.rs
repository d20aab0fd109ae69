//! Raster primitives used by the connection search: disc dilation, instance
//! label maps, overlap queries and slot partitioning of bounding boxes.

use std::collections::BTreeMap;

use crate::mask::{BBox, Mask, Pixel};

/// Offsets of a disc structuring element (Euclidean distance <= radius).
fn disc_offsets(radius: u32) -> Vec<(i64, i64)> {
    let r = radius as i64;
    let mut out = Vec::new();
    for dy in -r..=r {
        for dx in -r..=r {
            if dx * dx + dy * dy <= r * r {
                out.push((dx, dy));
            }
        }
    }
    out
}

/// Morphological dilation with a disc of `radius` pixels, clipped at the frame.
pub fn dilate(mask: &Mask, radius: u32) -> Mask {
    let Some((src, bits)) = mask.window_bits() else {
        return mask.clone();
    };
    if radius == 0 {
        return mask.clone();
    }
    let (fw, fh) = (mask.width(), mask.height());
    let win = BBox::new(
        src.x0.saturating_sub(radius),
        src.y0.saturating_sub(radius),
        (src.x1 + radius).min(fw - 1),
        (src.y1 + radius).min(fh - 1),
    );
    let ww = win.width() as i64;
    let mut out = vec![false; (win.width() * win.height()) as usize];
    let offsets = disc_offsets(radius);
    let sw = src.width() as i64;
    let sh = src.height() as i64;
    let src_at = |x: i64, y: i64| x >= 0 && y >= 0 && x < sw && y < sh && bits[(y * sw + x) as usize];

    for sy in 0..sh {
        for sx in 0..sw {
            if !bits[(sy * sw + sx) as usize] {
                continue;
            }
            let gx = src.x0 as i64 + sx;
            let gy = src.y0 as i64 + sy;
            out[((gy - win.y0 as i64) * ww + (gx - win.x0 as i64)) as usize] = true;
            // A pixel whose four neighbours are all set has its disc covered by theirs.
            let interior = src_at(sx - 1, sy) && src_at(sx + 1, sy) && src_at(sx, sy - 1) && src_at(sx, sy + 1);
            if interior {
                continue;
            }
            for &(dx, dy) in &offsets {
                let x = gx + dx;
                let y = gy + dy;
                if x < win.x0 as i64 || y < win.y0 as i64 || x > win.x1 as i64 || y > win.y1 as i64 {
                    continue;
                }
                out[((y - win.y0 as i64) * ww + (x - win.x0 as i64)) as usize] = true;
            }
        }
    }
    Mask::from_window_bits(fw, fh, win, out)
}

/// Scene-sized raster of instance labels: `0` is background, `v > 0` is the
/// instance with ID `v - 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    width: u32,
    height: u32,
    labels: Vec<u32>,
}

impl LabelMap {
    pub fn new(width: u32, height: u32) -> Self {
        Self { width, height, labels: vec![0; width as usize * height as usize] }
    }

    /// Paint `(instance_id, mask)` pairs; where masks overlap the higher ID wins.
    pub fn from_masks<'a, I>(width: u32, height: u32, masks: I) -> Self
    where
        I: IntoIterator<Item = (usize, &'a Mask)>,
    {
        let mut map = Self::new(width, height);
        for (id, mask) in masks {
            let value = id as u32 + 1;
            for p in mask.pixels() {
                if p.x < width && p.y < height {
                    let slot = &mut map.labels[p.y as usize * width as usize + p.x as usize];
                    *slot = (*slot).max(value);
                }
            }
        }
        map
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn get(&self, x: u32, y: u32) -> u32 {
        self.labels[y as usize * self.width as usize + x as usize]
    }
}

/// Pixels shared between a mask and one labelled instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Overlap {
    pub instance_id: usize,
    pub pixels: Vec<Pixel>,
}

/// For each non-zero label under `mask`, the pixels it shares with the mask,
/// ascending by instance ID.
pub fn overlap_labels(labels: &LabelMap, mask: &Mask) -> Vec<Overlap> {
    let mut by_id: BTreeMap<usize, Vec<Pixel>> = BTreeMap::new();
    for p in mask.pixels() {
        if p.x >= labels.width || p.y >= labels.height {
            continue;
        }
        let v = labels.get(p.x, p.y);
        if v != 0 {
            by_id.entry(v as usize - 1).or_default().push(p);
        }
    }
    by_id.into_iter().map(|(instance_id, pixels)| Overlap { instance_id, pixels }).collect()
}

/// Slot (1-based) of `bbox` holding the centroid of `pixels`.
///
/// The box is cut into `n_slots` equal bands along its major axis; slot 1 is
/// the top band for vertical boxes and the left band for horizontal ones. Each
/// pixel covers a unit cell, so the centroid row `c` sits at fraction
/// `(c - y0 + 0.5) / height` along the box.
pub fn slot_index(bbox: &BBox, pixels: &[Pixel], n_slots: u32) -> u32 {
    let n_slots = n_slots.max(1);
    if pixels.is_empty() {
        return 1;
    }
    let vertical = bbox.is_vertical();
    let (start, extent) = if vertical { (bbox.y0, bbox.height()) } else { (bbox.x0, bbox.width()) };
    // Exact rational arithmetic relative to the box, so translating the box
    // and pixels together never moves a centroid across a slot boundary.
    let offset: i128 = pixels.iter().map(|p| i128::from(if vertical { p.y } else { p.x }) - i128::from(start)).sum();
    let k = pixels.len() as i128;
    let num = (2 * offset + k).max(0) * i128::from(n_slots);
    let den = 2 * k * i128::from(extent.max(1));
    ((num / den) as u32).min(n_slots - 1) + 1
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_pixel_radius_one_is_plus_shape() {
        let m = Mask::from_pixels(9, 9, [Pixel::new(4, 4)]);
        let d = dilate(&m, 1);
        let mut got: Vec<Pixel> = d.pixels().collect();
        got.sort();
        let mut want = vec![Pixel::new(4, 3), Pixel::new(3, 4), Pixel::new(4, 4), Pixel::new(5, 4), Pixel::new(4, 5)];
        want.sort();
        assert_eq!(got, want);
    }

    #[test]
    fn full_and_empty_masks_are_fixed_points() {
        let full = Mask::full(12, 7);
        assert_eq!(dilate(&full, 3), full);
        let empty = Mask::empty(12, 7);
        assert_eq!(dilate(&empty, 3), empty);
    }

    #[test]
    fn dilation_clips_at_border() {
        let m = Mask::from_pixels(10, 10, [Pixel::new(0, 0)]);
        let d = dilate(&m, 2);
        // Quarter disc of radius 2 left inside the frame.
        let want = [(0, 0), (1, 0), (2, 0), (0, 1), (1, 1), (0, 2)];
        assert_eq!(d.count(), want.len());
        for (x, y) in want {
            assert!(d.get(x, y));
        }
    }

    #[test]
    fn label_map_encoding_and_conflict() {
        let a = Mask::from_rect(10, 10, BBox::new(0, 0, 4, 4));
        let b = Mask::from_rect(10, 10, BBox::new(3, 3, 8, 8));
        let map = LabelMap::from_masks(10, 10, [(7, &b), (3, &a)]);
        assert_eq!(map.get(0, 0), 4);
        assert_eq!(map.get(8, 8), 8);
        assert_eq!(map.get(4, 4), 8);
        assert_eq!(map.get(9, 0), 0);
    }

    #[test]
    fn overlap_cases() {
        let inst = Mask::from_rect(8, 8, BBox::new(0, 0, 7, 3));
        let map = LabelMap::from_masks(8, 8, [(0, &inst)]);
        let disjoint = Mask::from_rect(8, 8, BBox::new(0, 5, 7, 7));
        assert!(overlap_labels(&map, &disjoint).is_empty());

        let rows_2_to_5 = Mask::from_rect(8, 8, BBox::new(0, 2, 7, 5));
        let hits = overlap_labels(&map, &rows_2_to_5);
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].instance_id, 0);
        assert_eq!(hits[0].pixels.len(), 16);
        assert!(hits[0].pixels.iter().all(|p| p.y == 2 || p.y == 3));
    }

    #[test]
    fn overlap_with_two_instances_partitions() {
        let a = Mask::from_rect(16, 16, BBox::new(0, 0, 7, 15));
        let b = Mask::from_rect(16, 16, BBox::new(8, 0, 15, 15));
        let map = LabelMap::from_masks(16, 16, [(0, &a), (1, &b)]);
        let probe = Mask::from_rect(16, 16, BBox::new(4, 4, 11, 11));
        let hits = overlap_labels(&map, &probe);
        assert_eq!(hits.len(), 2);
        assert_eq!(hits[0].pixels.len() + hits[1].pixels.len(), 64);
        assert!(hits[0].pixels.iter().all(|p| !hits[1].pixels.contains(p)));
    }

    #[test]
    fn slot_boundaries() {
        let bbox = BBox::new(0, 0, 9, 99);
        assert_eq!(slot_index(&bbox, &[Pixel::new(5, 0)], 4), 1);
        assert_eq!(slot_index(&bbox, &[Pixel::new(5, 99)], 4), 4);
        // Centroid at 55% of the major axis: (c + 0.5) / 100 = 0.55.
        let c = [Pixel::new(5, 54), Pixel::new(5, 55)];
        assert_eq!(slot_index(&bbox, &c, 4), 3);
    }

    #[test]
    fn horizontal_box_uses_columns() {
        let bbox = BBox::new(0, 0, 99, 9);
        assert_eq!(slot_index(&bbox, &[Pixel::new(0, 5)], 4), 1);
        assert_eq!(slot_index(&bbox, &[Pixel::new(99, 5)], 4), 4);
    }
}
