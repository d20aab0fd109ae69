//! Depth rasters: loading, writing and robust per-pixel depth estimates.

use std::path::Path;

use image::{ImageBuffer, Luma};

use crate::error::{Error, Result};
use crate::mask::Pixel;

/// Per-pixel depth in stored sensor units; `0` marks an invalid reading.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DepthImage {
    width: u32,
    height: u32,
    values: Vec<u16>,
}

impl DepthImage {
    pub fn new(width: u32, height: u32, values: Vec<u16>) -> Result<Self> {
        if values.len() != (width as usize) * (height as usize) {
            return Err(Error::Geometry(format!(
                "depth buffer holds {} values for a {width}x{height} raster",
                values.len()
            )));
        }
        Ok(Self { width, height, values })
    }

    pub fn filled(width: u32, height: u32, value: u16) -> Self {
        Self { width, height, values: vec![value; width as usize * height as usize] }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn values(&self) -> &[u16] {
        &self.values
    }

    pub fn get(&self, x: u32, y: u32) -> u16 {
        self.values[y as usize * self.width as usize + x as usize]
    }

    pub fn set(&mut self, x: u32, y: u32, v: u16) {
        self.values[y as usize * self.width as usize + x as usize] = v;
    }

    pub fn is_valid(&self, x: u32, y: u32) -> bool {
        x < self.width && y < self.height && self.get(x, y) != 0
    }

    /// Metric depth of a pixel, `None` where the reading is invalid.
    pub fn meters(&self, x: u32, y: u32, depth_scale: f64) -> Option<f64> {
        self.is_valid(x, y).then(|| self.get(x, y) as f64 * depth_scale)
    }

    /// Fail with [`Error::Dimension`] unless the raster is `width` x `height`.
    pub fn check_dimensions(&self, width: u32, height: u32) -> Result<()> {
        if self.width != width || self.height != height {
            return Err(Error::Dimension {
                expected_w: width,
                expected_h: height,
                found_w: self.width,
                found_h: self.height,
            });
        }
        Ok(())
    }

    pub fn to_png_bytes(&self) -> Result<Vec<u8>> {
        let buf: ImageBuffer<Luma<u16>, Vec<u16>> = ImageBuffer::from_raw(self.width, self.height, self.values.clone())
            .expect("buffer length checked at construction");
        let mut out = std::io::Cursor::new(Vec::new());
        buf.write_to(&mut out, image::ImageFormat::Png)?;
        Ok(out.into_inner())
    }

    pub fn from_png_bytes(bytes: &[u8]) -> Result<Self> {
        let img = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)?;
        match img {
            image::DynamicImage::ImageLuma16(buf) => {
                let (w, h) = buf.dimensions();
                DepthImage::new(w, h, buf.into_raw())
            }
            other => Err(Error::Usage(format!("depth image must be single-channel 16-bit, found {:?}", other.color()))),
        }
    }
}

/// Load a 16-bit single-channel depth PNG and check it against the mask raster.
pub fn load_depth(path: &Path, expected: Option<(u32, u32)>) -> Result<DepthImage> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let depth = DepthImage::from_png_bytes(&bytes)?;
    if let Some((w, h)) = expected {
        depth.check_dimensions(w, h)?;
    }
    Ok(depth)
}

/// Robust metric depth at `pixel`.
///
/// Takes the median of valid readings in the `(2w+1)^2` window around the
/// pixel. If the whole window is invalid, the nearest valid pixel within
/// `fallback_radius` is used instead (ties resolved in row-major order).
pub fn estimate_real_depth(
    pixel: Pixel,
    depth: &DepthImage,
    depth_scale: f64,
    half_window: u32,
    fallback_radius: u32,
) -> Result<f64> {
    if pixel.x >= depth.width || pixel.y >= depth.height {
        return Err(Error::Depth(format!(
            "pixel ({}, {}) outside {}x{} depth raster",
            pixel.x, pixel.y, depth.width, depth.height
        )));
    }
    let mut window: Vec<u16> = neighbourhood(pixel, half_window, depth.width, depth.height)
        .map(|(x, y)| depth.get(x, y))
        .filter(|v| *v != 0)
        .collect();
    if !window.is_empty() {
        window.sort_unstable();
        let n = window.len();
        let median =
            if n % 2 == 1 { window[n / 2] as f64 } else { (window[n / 2 - 1] as f64 + window[n / 2] as f64) / 2.0 };
        return Ok(median * depth_scale);
    }

    let r2_max = (fallback_radius as u64).pow(2);
    let mut best: Option<(u64, u16)> = None;
    for (x, y) in neighbourhood(pixel, fallback_radius, depth.width, depth.height) {
        let v = depth.get(x, y);
        if v == 0 {
            continue;
        }
        let d2 = (x.abs_diff(pixel.x) as u64).pow(2) + (y.abs_diff(pixel.y) as u64).pow(2);
        if d2 <= r2_max && best.is_none_or(|(b, _)| d2 < b) {
            best = Some((d2, v));
        }
    }
    best.map(|(_, v)| v as f64 * depth_scale).ok_or_else(|| {
        Error::Depth(format!("no valid depth within {fallback_radius} px of ({}, {})", pixel.x, pixel.y))
    })
}

fn neighbourhood(p: Pixel, r: u32, width: u32, height: u32) -> impl Iterator<Item = (u32, u32)> {
    let x0 = p.x.saturating_sub(r);
    let y0 = p.y.saturating_sub(r);
    let x1 = (p.x + r).min(width.saturating_sub(1));
    let y1 = (p.y + r).min(height.saturating_sub(1));
    (y0..=y1).flat_map(move |y| (x0..=x1).map(move |x| (x, y)))
}
