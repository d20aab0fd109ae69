//! Annotated overlay of a plant model and its pruning points.

use image::{Rgb, RgbImage};
use vinecut_core::{OrganClass, PlantModel, Point2, PruningPoint};

pub const CORDON: Rgb<u8> = Rgb([0, 0, 139]);
pub const ARM: Rgb<u8> = Rgb([0, 150, 70]);
pub const SPUR: Rgb<u8> = Rgb([230, 120, 0]);
pub const CANE: Rgb<u8> = Rgb([110, 190, 255]);
pub const NODE: Rgb<u8> = Rgb([255, 230, 0]);
/// Items the connection search left unattached.
pub const ORPHAN: Rgb<u8> = Rgb([255, 0, 255]);
pub const EDGE: Rgb<u8> = Rgb([255, 255, 255]);
pub const POINT: Rgb<u8> = Rgb([255, 0, 0]);

/// Opacity of organ tints over the canvas.
const TINT: f32 = 0.6;
const MARKER_RADIUS: i64 = 3;
const TICK_HALF_LENGTH: f64 = 9.0;

pub fn class_color(class: OrganClass) -> Rgb<u8> {
    match class {
        OrganClass::MainCordon => CORDON,
        OrganClass::Arm => ARM,
        OrganClass::Spur => SPUR,
        OrganClass::Cane => CANE,
        OrganClass::Node => NODE,
    }
}

fn blend(under: Rgb<u8>, over: Rgb<u8>, a: f32) -> Rgb<u8> {
    Rgb(std::array::from_fn(|i| (under[i] as f32 * (1.0 - a) + over[i] as f32 * a).round() as u8))
}

fn put(img: &mut RgbImage, x: i64, y: i64, c: Rgb<u8>) {
    if x >= 0 && y >= 0 && (x as u32) < img.width() && (y as u32) < img.height() {
        img.put_pixel(x as u32, y as u32, c);
    }
}

/// Bresenham segment, clipped to the image.
pub fn draw_line(img: &mut RgbImage, a: Point2, b: Point2, c: Rgb<u8>) {
    let (mut x, mut y) = (a.x.round() as i64, a.y.round() as i64);
    let (x1, y1) = (b.x.round() as i64, b.y.round() as i64);
    let (dx, dy) = ((x1 - x).abs(), -(y1 - y).abs());
    let (sx, sy) = ((x1 - x).signum(), (y1 - y).signum());
    let mut err = dx + dy;
    loop {
        put(img, x, y, c);
        if x == x1 && y == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
}

/// Draw `model` and `points` over `canvas`.
///
/// Organs are tinted by class (orphans in magenta), tree edges join origins
/// and every point gets a red disc with a tick along its cut orientation.
pub fn render_overlay(mut canvas: RgbImage, model: &PlantModel, points: &[PruningPoint]) -> RgbImage {
    let orphaned = |id: usize| model.root_of(id).is_none();
    let mut order: Vec<usize> = (0..model.items.len()).collect();
    order.sort_by_key(|&i| (model.items[i].class(), i));
    for id in order {
        let it = &model.items[id];
        let color = if orphaned(id) { ORPHAN } else { class_color(it.class()) };
        for p in it.instance.mask.pixels() {
            if p.x < canvas.width() && p.y < canvas.height() {
                let under = *canvas.get_pixel(p.x, p.y);
                canvas.put_pixel(p.x, p.y, blend(under, color, TINT));
            }
        }
    }
    for it in &model.items {
        if let Some(parent) = it.parent {
            draw_line(&mut canvas, model.items[parent].origin_px, it.origin_px, EDGE);
        }
    }
    for p in points {
        let (cx, cy) = (p.position_px.x as i64, p.position_px.y as i64);
        let (ux, uy) = (p.angle_rad.cos() * TICK_HALF_LENGTH, p.angle_rad.sin() * TICK_HALF_LENGTH);
        let c = p.position_px.to_point();
        draw_line(&mut canvas, Point2::new(c.x - ux, c.y - uy), Point2::new(c.x + ux, c.y + uy), POINT);
        for dy in -MARKER_RADIUS..=MARKER_RADIUS {
            for dx in -MARKER_RADIUS..=MARKER_RADIUS {
                if dx * dx + dy * dy <= MARKER_RADIUS * MARKER_RADIUS {
                    put(&mut canvas, cx + dx, cy + dy, POINT);
                }
            }
        }
    }
    canvas
}
