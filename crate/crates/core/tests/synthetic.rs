use std::collections::VecDeque;

use vinecut_core::synthetic::*;
use vinecut_core::*;

fn components(mask: &Mask) -> usize {
    let (w, h) = (mask.width(), mask.height());
    let mut seen = vec![false; (w * h) as usize];
    let mut count = 0;
    for p in mask.pixels() {
        if seen[(p.y * w + p.x) as usize] {
            continue;
        }
        count += 1;
        let mut queue = VecDeque::from([p]);
        seen[(p.y * w + p.x) as usize] = true;
        while let Some(q) = queue.pop_front() {
            let (x, y) = (q.x as i64, q.y as i64);
            for (nx, ny) in [(x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)] {
                if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                    continue;
                }
                let n = Pixel::new(nx as u32, ny as u32);
                if mask.contains(n) && !seen[(n.y * w + n.x) as usize] {
                    seen[(n.y * w + n.x) as usize] = true;
                    queue.push_back(n);
                }
            }
        }
    }
    count
}

#[test]
fn five_spurs_has_twenty_six_instances() {
    let b = generate_scene(&SceneSpec::five_spurs(0)).unwrap();
    assert_eq!(b.records.len(), 1 + 5 + 5 + 15);
    let count = |c| b.records.iter().filter(|r| r.organ_class == c).count();
    assert_eq!(count(OrganClass::MainCordon), 1);
    assert_eq!(count(OrganClass::Spur), 5);
    assert_eq!(count(OrganClass::Cane), 5);
    assert_eq!(count(OrganClass::Node), 15);
    assert!(b.truth_tree.check_invariants().is_empty());
    assert_eq!(b.truth_assessments.len(), 5);
}

#[test]
fn same_seed_same_bytes() {
    for seed in [0, 17, 123] {
        let a = generate_scene(&SceneSpec::randomized(seed)).unwrap();
        let b = generate_scene(&SceneSpec::randomized(seed)).unwrap();
        assert_eq!(a.to_coco_json().unwrap(), b.to_coco_json().unwrap());
        assert_eq!(a.depth_png().unwrap(), b.depth_png().unwrap());
        assert_eq!(a.truth_tree.edges(), b.truth_tree.edges());
    }
}

#[test]
fn downward_cane_is_a_fallback_link_in_truth() {
    let mut spec = SceneSpec::five_spurs(3);
    spec.regions[2].kind = RegionKind::Cane;
    spec.regions[2].direction = Direction::Down;
    let b = generate_scene(&spec).unwrap();
    let down: Vec<_> = b.organs.iter().enumerate().filter(|(_, o)| o.direction == Direction::Down).collect();
    assert_eq!(down.len(), 1 + 3);
    let (cane, _) = down.iter().find(|(_, o)| o.class == OrganClass::Cane).unwrap();
    let link = b.truth_tree.item(*cane).link.unwrap();
    assert!(link.fallback);
    assert_eq!(link.slot, 1);

    let cfg = PipelineConfig::default();
    let m = assemble_model(&b.records, b.depth.clone(), &b.intrinsics, &cfg).unwrap();
    assert!(score_model(&m, &b.truth_tree).unwrap().isomorphic);
    assert!(m.item(*cane).link.unwrap().fallback);
}

#[test]
fn organs_past_the_canvas_are_rejected() {
    let mut spec = SceneSpec::five_spurs(0);
    spec.regions[0].canes[0].length = 400;
    assert!(matches!(generate_scene(&spec), Err(Error::Spec(_))));
}

#[test]
fn zero_ops_is_identity() {
    let b = generate_scene(&SceneSpec::randomized(4)).unwrap();
    let p = perturb(&b, &[], 99);
    assert_eq!(p.to_coco_json().unwrap(), b.to_coco_json().unwrap());
    assert_eq!(p.depth_png().unwrap(), b.depth_png().unwrap());
}

#[test]
fn erased_band_splits_cane_into_two_pieces() {
    let b = generate_scene(&SceneSpec::five_spurs(0)).unwrap();
    let cane = b.records.iter().position(|r| r.organ_class == OrganClass::Cane).unwrap();
    let op = PerturbOp::EraseBand { instance: cane, at: 0.5, width_px: 5 };
    let p = perturb(&b, &[op], 0);
    let edited = &p.records[cane].mask;
    assert_eq!(components(&b.records[cane].mask), 1);
    assert_eq!(components(edited), 2);
    assert_eq!(b.records[cane].mask.count() - edited.count(), 5 * b.records[cane].bbox.width() as usize);
    assert_eq!(p.truth_tree.edges(), b.truth_tree.edges());

    // Ingest sees the same split mask.
    let (w, h) = (p.spec.width, p.spec.height);
    let back = parse_annotations(p.to_coco_json().unwrap().as_bytes(), &ClassMap::default(), None).unwrap();
    assert_eq!((back.image.width, back.image.height), (w, h));
    assert_eq!(components(&back.records[cane].mask), 2);
    assert_eq!(&back.records[cane].mask, edited);
}

#[test]
fn bundle_round_trips_through_coco_and_png() {
    let b = generate_scene(&SceneSpec::randomized(11)).unwrap();
    let back = parse_annotations(b.to_coco_json().unwrap().as_bytes(), &ClassMap::default(), None).unwrap();
    assert_eq!(back.records.len(), b.records.len());
    for (x, y) in back.records.iter().zip(&b.records) {
        assert_eq!(x.mask, y.mask);
        assert_eq!(x.organ_class, y.organ_class);
    }
    let depth = DepthImage::from_png_bytes(&b.depth_png().unwrap()).unwrap();
    assert_eq!(depth.values(), b.depth.values());
}

fn two_spur_bundle() -> SceneBundle {
    let mut spec = SceneSpec::five_spurs(1);
    spec.regions.truncate(2);
    generate_scene(&spec).unwrap()
}

#[test]
fn scoring_examples() {
    let b = two_spur_bundle();
    let truth = &b.truth_tree;
    assert_eq!(truth.edges().len(), 10);
    let same = score_model(truth, truth).unwrap();
    assert_eq!((same.precision, same.recall, same.isomorphic), (1.0, 1.0, true));

    let node = truth.items.iter().find(|i| i.class() == OrganClass::Node).unwrap().id();
    let mut missing = truth.clone();
    missing.items[node].parent = None;
    let s = score_model(&missing, truth).unwrap();
    assert_eq!((s.precision, s.recall, s.isomorphic), (1.0, 0.9, false));

    let canes: Vec<_> = truth.items.iter().filter(|i| i.class() == OrganClass::Cane).map(|i| i.id()).collect();
    let mut moved = truth.clone();
    moved.items[node].parent = Some(if truth.item(node).parent == Some(canes[0]) { canes[1] } else { canes[0] });
    let s = score_model(&moved, truth).unwrap();
    assert_eq!((s.true_positives, s.predicted - s.true_positives, s.truth - s.true_positives), (9, 1, 1));
}

#[test]
fn scoring_rejects_mismatched_ids() {
    let b = two_spur_bundle();
    let other = generate_scene(&SceneSpec::five_spurs(1)).unwrap();
    assert!(matches!(score_model(&b.truth_tree, &other.truth_tree), Err(Error::Scoring(_))));
}

#[test]
fn clean_scenes_reproduce_truth_points() {
    let cfg = PipelineConfig::default();
    for seed in 0..20 {
        let r = evaluate_scene(&SceneSpec::randomized(seed), &cfg).unwrap();
        assert!(r.edges.isomorphic, "seed {seed}");
        let err = r.max_point_error_px.expect("point lists pair up");
        assert!(err <= 1.5, "seed {seed}: {err}");
    }
}

#[test]
fn sequential_and_parallel_grids_agree() {
    let cfg = PipelineConfig::default();
    let specs: Vec<_> = (0..12).map(SceneSpec::randomized).collect();
    let a: Vec<_> = evaluate_grid(&specs, &cfg, Execution::Sequential).into_iter().map(Result::unwrap).collect();
    let b: Vec<_> = evaluate_grid(&specs, &cfg, Execution::Parallel).into_iter().map(Result::unwrap).collect();
    assert_eq!(a, b);
}

#[test]
fn spec_round_trips_through_json() {
    let mut spec = SceneSpec::randomized(5);
    spec.ops = vec![PerturbOp::Occlude { fraction: 0.3, width_px: 6 }, PerturbOp::DepthNoise { sigma_m: 0.005 }];
    let text = serde_json::to_string(&spec).unwrap();
    let back: SceneSpec = serde_json::from_str(&text).unwrap();
    assert_eq!(back, spec);
}
