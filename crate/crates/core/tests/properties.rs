mod common;

use std::f64::consts::PI;
use std::sync::Arc;

use proptest::prelude::*;
use vinecut_core::assess::{
    adjacent_distance, assess_all, classify_growth_direction, count_canes, estimate_vigor, location_from_column,
    location_thresholds, AssessmentFlag,
};
use vinecut_core::config::AdjacencyMetric;
use vinecut_core::instance::rect_ring;
use vinecut_core::mask::rasterize_polygons;
use vinecut_core::pruning::{interpolate_pruning_point, orientation_angle, PointFlag};
use vinecut_core::raster::{dilate, overlap_labels, slot_index, LabelMap};
use vinecut_core::synthetic::*;
use vinecut_core::*;

fn cross(o: (i64, i64), a: (i64, i64), b: (i64, i64)) -> i64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Andrew's monotone chain; drops collinear points.
fn hull(mut pts: Vec<(i64, i64)>) -> Vec<(i64, i64)> {
    pts.sort_unstable();
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut lower: Vec<(i64, i64)> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<(i64, i64)> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

fn random_mask(w: u32, h: u32, bits: &[bool]) -> Mask {
    Mask::from_pixels(w, h, (0..w * h).filter(|i| bits[*i as usize]).map(|i| Pixel::new(i % w, i / w)))
}

fn bits(w: u32, h: u32, density: f64) -> impl Strategy<Value = Vec<bool>> {
    prop::collection::vec(prop::bool::weighted(density), (w * h) as usize)
}

fn point3() -> impl Strategy<Value = Point3> {
    (-2.0..2.0f64, -2.0..2.0f64, 0.2..3.0f64).prop_map(|(x, y, z)| Point3::new(x, y, z))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn convex_polygon_matches_half_plane_oracle(pts in prop::collection::vec((0i64..48, 0i64..48), 3..9)) {
        let ring = hull(pts);
        prop_assume!(ring.len() >= 3);
        let poly: Vec<[f64; 2]> = ring.iter().map(|&(x, y)| [x as f64, y as f64]).collect();
        let mask = rasterize_polygons(&[poly], 48, 48).unwrap();
        for y in 0..48i64 {
            for x in 0..48i64 {
                let inside = (0..ring.len()).all(|i| cross(ring[i], ring[(i + 1) % ring.len()], (x, y)) >= 0);
                prop_assert_eq!(mask.get(x as u32, y as u32), inside, "pixel ({}, {})", x, y);
            }
        }
        let bb = mask.bbox().unwrap();
        prop_assert!(mask.pixels().all(|p| bb.contains(p)));
        prop_assert!(!mask.row(bb.y0).is_empty() && !mask.row(bb.y1).is_empty());
        prop_assert!(!mask.column(bb.x0).is_empty() && !mask.column(bb.x1).is_empty());
    }

    #[test]
    fn coco_round_trip_keeps_masks(rects in prop::collection::vec((0u32..30, 0u32..30, 1u32..10, 1u32..10, 0usize..5), 1..6)) {
        let records: Vec<_> = rects
            .iter()
            .enumerate()
            .map(|(i, &(x, y, w, h, c))| common::rect(i, OrganClass::ALL[c], (x, y, x + w, y + h), 40, 40))
            .collect();
        let text = to_coco_json(&records, 40, 40, "scene.png").unwrap();
        let back = parse_annotations(text.as_bytes(), &ClassMap::default(), None).unwrap();
        prop_assert_eq!(back.records.len(), records.len());
        for (a, b) in back.records.iter().zip(&records) {
            prop_assert_eq!(&a.mask, &b.mask);
            prop_assert_eq!(a.bbox, b.bbox);
            prop_assert_eq!(a.organ_class, b.organ_class);
        }
    }

    #[test]
    fn dilation_is_monotone(b in bits(24, 24, 0.05), r in 1u32..4) {
        let m = random_mask(24, 24, &b);
        let d1 = dilate(&m, r);
        let d2 = dilate(&m, r + 1);
        prop_assert!(m.pixels().all(|p| d1.contains(p)));
        prop_assert!(d1.pixels().all(|p| d2.contains(p)));
    }

    #[test]
    fn overlaps_cover_labelled_pixels_under_mask(labels in prop::collection::vec(0u32..4, 32 * 32), b in bits(32, 32, 0.4)) {
        let masks: Vec<Mask> = (0..3)
            .map(|k| Mask::from_pixels(32, 32, (0..32 * 32u32).filter(|i| labels[*i as usize] == k + 1).map(|i| Pixel::new(i % 32, i / 32))))
            .collect();
        let map = LabelMap::from_masks(32, 32, masks.iter().enumerate());
        let query = random_mask(32, 32, &b);
        let got = overlap_labels(&map, &query);
        let mut union: Vec<Pixel> = got.iter().flat_map(|o| o.pixels.iter().copied()).collect();
        union.sort_by_key(|p| (p.y, p.x));
        let total = union.len();
        union.dedup();
        prop_assert_eq!(total, union.len(), "pixel sets overlap");
        let expected: Vec<Pixel> = query.pixels().filter(|p| map.get(p.x, p.y) != 0).collect();
        prop_assert_eq!(union, expected);
        for o in &got {
            prop_assert!(o.pixels.iter().all(|p| map.get(p.x, p.y) == o.instance_id as u32 + 1));
        }
    }

    #[test]
    fn deproject_then_project_returns_pixel(x in 0.0..640.0f64, y in 0.0..480.0f64, z in 0.1..5.0f64, fx in 200.0..1500.0f64) {
        let cam = CameraIntrinsics { fx, fy: fx * 1.01, cx: 321.5, cy: 239.0, depth_scale: 0.001 };
        let p = deproject(Point2::new(x, y), z, &cam).unwrap();
        prop_assert!(p.z > 0.0);
        let back = project(p, &cam).unwrap();
        prop_assert!((back.x - x).abs() <= 0.5 && (back.y - y).abs() <= 0.5);
    }

    #[test]
    fn slot_index_ignores_translation(
        (x0, y0, w, h) in (0u32..50, 0u32..50, 1u32..40, 1u32..40),
        picks in prop::collection::vec((0.0..1.0f64, 0.0..1.0f64), 1..10),
        (dx, dy) in (0u32..200, 0u32..200),
        n in 2u32..8,
    ) {
        let bb = BBox::new(x0, y0, x0 + w - 1, y0 + h - 1);
        let px: Vec<Pixel> = picks.iter().map(|(a, b)| Pixel::new(x0 + (a * w as f64) as u32, y0 + (b * h as f64) as u32)).collect();
        let moved_bb = BBox::new(bb.x0 + dx, bb.y0 + dy, bb.x1 + dx, bb.y1 + dy);
        let moved: Vec<Pixel> = px.iter().map(|p| Pixel::new(p.x + dx, p.y + dy)).collect();
        let s = slot_index(&bb, &px, n);
        prop_assert!((1..=n).contains(&s));
        prop_assert_eq!(s, slot_index(&moved_bb, &moved, n));
    }

    #[test]
    fn location_classes_partition_rows(y in 0.0..400.0f64, d in 1.0..80.0f64, av in 1e-6..=PI, ad in 1e-6..=PI, t in -0.2..1.2f64) {
        let (dorsal, ventral) = location_thresholds(y, d, av, ad);
        prop_assert!(dorsal <= ventral);
        let y_pr = y + t * d;
        let is_d = y_pr < y + d / 2.0 * (1.0 - (ad / 2.0).cos());
        let is_v = y_pr > y + d - d / 2.0 * (1.0 - (av / 2.0).cos());
        prop_assert!(!(is_d && is_v));
        let expected = if is_d { Location::Dorsal } else if is_v { Location::Ventral } else { Location::Intermediate };
        prop_assert_eq!(location_from_column(y_pr, y, d, av, ad), expected);
    }

    #[test]
    fn growth_matches_ratios_and_ignores_swap(o in point3(), e in point3(), al in 0.05..2.0f64, ac in 0.05..2.0f64) {
        let g = classify_growth_direction(Some(o), Some(e), al, ac);
        prop_assert_eq!(g, classify_growth_direction(Some(e), Some(o), al, ac));
        let dy = (o.y - e.y).abs();
        let expected = if dy > 0.0 && (o.x - e.x).abs() / dy <= al && (o.z - e.z).abs() / dy <= ac {
            GrowthDirection::Vertical
        } else {
            GrowthDirection::NotVertical
        };
        prop_assert_eq!(g, expected);
        prop_assert_eq!(classify_growth_direction(None, Some(e), al, ac), GrowthDirection::Unknown);
    }

    #[test]
    fn adjacency_is_symmetric_under_reversal(xs in prop::collection::vec(prop::option::weighted(0.9, -1.0..1.0f64), 1..8), min in any::<bool>()) {
        let metric = if min { AdjacencyMetric::Min } else { AdjacencyMetric::Max };
        let origins: Vec<Option<Point3>> = xs.iter().map(|x| x.map(|x| Point3::new(x, 0.1, 1.0))).collect();
        let mut rev = origins.clone();
        rev.reverse();
        let n = origins.len();
        for i in 0..n {
            let a = adjacent_distance(&origins, i, metric);
            let b = adjacent_distance(&rev, n - 1 - i, metric);
            prop_assert!(a == b || (a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn interpolation_stays_on_segment(p1 in point3(), p2 in point3(), t in 0.0..=1.0f64) {
        let big_d = p1.distance(p2);
        prop_assume!(big_d > 1e-6);
        prop_assert_eq!(interpolate_pruning_point(p1, p2, 0.0).unwrap().0, p1);
        prop_assert_eq!(interpolate_pruning_point(p1, p2, big_d).unwrap().0, p2);
        let d = t * big_d;
        let (pp, clamped) = interpolate_pruning_point(p1, p2, d).unwrap();
        prop_assert!(!clamped);
        prop_assert!((pp.distance(p1) - d).abs() < 1e-9);
        prop_assert!((pp.distance(p1) + pp.distance(p2) - big_d).abs() < 1e-9);
        let (_, over) = interpolate_pruning_point(p1, p2, big_d + 0.1).unwrap();
        prop_assert!(over);
    }

    #[test]
    fn orientation_is_perpendicular_and_symmetric(a in (-500.0..500.0f64, -500.0..500.0f64), b in (-500.0..500.0f64, -500.0..500.0f64)) {
        let (p1, p2) = (Point2::new(a.0, a.1), Point2::new(b.0, b.1));
        prop_assume!(p1 != p2);
        let alpha = orientation_angle(p1, p2).unwrap();
        let (dx, dy) = (p1.x - p2.x, p1.y - p2.y);
        let len = dx.hypot(dy);
        prop_assert!((alpha.cos() * dx / len + alpha.sin() * dy / len).abs() < 1e-9);
        prop_assert_eq!(alpha, orientation_angle(p2, p1).unwrap());
    }

    #[test]
    fn select_cut_follows_the_decision_table(
        loc in 0usize..3, canes in 0usize..4, growth in 0usize..3,
        vigor in prop::option::weighted(0.8, 0.0..0.03f64),
        origin in 0usize..3, adj in prop::option::weighted(0.8, 0.0..0.4f64),
    ) {
        let cfg = PipelineConfig::default();
        let a = RegionAssessment {
            location: [Location::Dorsal, Location::Ventral, Location::Intermediate][loc],
            cane_count: canes,
            growth: [GrowthDirection::Vertical, GrowthDirection::NotVertical, GrowthDirection::Unknown][growth],
            vigor_m: vigor,
            is_new: origin == 0,
            is_replacement: origin == 1,
            adjacent_distance_m: adj.unwrap_or(f64::INFINITY),
            flags: Vec::new(),
        };
        let basal = canes > 0;
        let in_range = vigor.map(|v| (0.006..=0.014).contains(&v));
        let expected = if a.is_new && a.adjacent_distance_m < 0.10 {
            CutDecision::Cut(CutType::CleanCut)
        } else if a.is_new && a.location == Location::Ventral {
            CutDecision::Cut(CutType::BaseBudCut)
        } else if a.is_replacement && basal {
            CutDecision::Cut(CutType::ReplacementCut)
        } else if basal && a.growth == GrowthDirection::Vertical && in_range == Some(true) {
            CutDecision::Cut(CutType::SpurCut)
        } else if basal && (a.growth == GrowthDirection::NotVertical || in_range == Some(false)) {
            CutDecision::Cut(CutType::BaseBudCut)
        } else if canes == 0 {
            CutDecision::Skip
        } else {
            CutDecision::Cut(CutType::SpurCut)
        };
        prop_assert_eq!(select_cut(&a, &cfg), expected);
    }

    #[test]
    fn rect_cover_rebuilds_mask(b in bits(20, 16, 0.35)) {
        let m = random_mask(20, 16, &b);
        let rects = mask_to_rects(&m);
        let mut covered = 0;
        for r in &rects {
            covered += (r.width() * r.height()) as usize;
        }
        prop_assert_eq!(covered, m.count(), "rectangles overlap or miss pixels");
        let rings: Vec<_> = rects.iter().map(|r| rect_ring(*r)).collect();
        if !rings.is_empty() {
            prop_assert_eq!(rasterize_polygons(&rings, 20, 16).unwrap(), m);
        }
    }
}

fn vertical_cane(x0: u32, width: u32, depth_mm: u16) -> (PlantModel, f64) {
    let cfg = PipelineConfig::default();
    let m = common::model_of(
        &[(OrganClass::MainCordon, (0, 100, 199, 119)), (OrganClass::Cane, (x0, 20, x0 + width - 1, 101))],
        200,
        160,
        depth_mm,
        &cfg,
    );
    let v = estimate_vigor(m.item(1), &m.scene.depth, &m.scene.intrinsics, &cfg).unwrap();
    (m, v)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn vigor_ignores_shift_and_scales_with_depth(x0 in 10u32..150, w in 2u32..12, z in 300u16..3000) {
        let (_, base) = vertical_cane(x0, w, z);
        let (_, shifted) = vertical_cane(x0 + 17, w, z);
        let (_, doubled) = vertical_cane(x0, w, 2 * z);
        prop_assert!((base - shifted).abs() < 1e-12);
        prop_assert!((doubled - 2.0 * base).abs() < 1e-12);
        prop_assert!((base - (w - 1) as f64 * z as f64 * 0.001 / 1000.0).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn perturbed_scenes_keep_model_invariants(seed in 0u64..5000, fraction in 0.0..0.6f64, sigma in 0.0..0.01f64) {
        let cfg = PipelineConfig::default();
        let clean = generate_scene(&SceneSpec::randomized(seed)).unwrap();
        let ops = [PerturbOp::Occlude { fraction, width_px: 6 }, PerturbOp::DepthNoise { sigma_m: sigma }];
        let b = perturb(&clean, &ops, seed);
        let m = assemble_model(&b.records, b.depth.clone(), &b.intrinsics, &cfg).unwrap();
        prop_assert!(m.check_invariants().is_empty(), "{:?}", m.check_invariants());
        for root in &m.roots {
            for r in vinecut_core::assess::regions_of(&m, *root) {
                let sub = m.subtree(r.item);
                let brute = sub.iter().filter(|i| m.item(**i).class() == OrganClass::Cane).count();
                prop_assert_eq!(count_canes(&m, r.item), brute);
                if let Some(c) = r.basal_cane {
                    prop_assert!(sub.contains(&c));
                }
            }
        }
        let regions = assess_all(&m, &cfg, Execution::Sequential);
        for (_, a) in &regions {
            prop_assert!(!(a.is_new && a.is_replacement));
            if a.vigor_m.is_none() && a.cane_count > 0 {
                prop_assert!(a.flags.contains(&AssessmentFlag::VigorUnknown));
            }
        }
        for p in generate_pruning_points(&m, &regions, &cfg) {
            let on_mask = m.item(p.target_item_id).instance.mask.contains(p.position_px);
            let on_depth = b.depth.is_valid(p.position_px.x, p.position_px.y);
            prop_assert!(
                on_mask || (on_depth && p.flags.contains(&PointFlag::SnappedToDepth)) || p.flags.contains(&PointFlag::CorrectionFailed),
                "{:?}", p
            );
        }
        let again = assemble_model(&b.records, b.depth.clone(), &b.intrinsics, &cfg).unwrap();
        prop_assert_eq!(json::to_text(&model_to_json(&m)), json::to_text(&model_to_json(&again)));
        prop_assert!(score_model(&m, &m).unwrap().isomorphic);
    }
}

#[test]
fn depth_noise_changes_only_valid_pixels() {
    let b = generate_scene(&SceneSpec::five_spurs(0)).unwrap();
    let p = perturb(&b, &[PerturbOp::DepthNoise { sigma_m: 0.005 }], 1);
    for (x, y) in b.depth.values().iter().zip(p.depth.values()) {
        assert_eq!(*x == 0, *y == 0);
    }
    assert_ne!(Arc::as_ptr(&b.depth), Arc::as_ptr(&p.depth));
}
