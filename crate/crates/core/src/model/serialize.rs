use serde_json::{json, Value};

use crate::json::{num, point2, point3};

use super::PlantModel;

/// Nested JSON view of the model: cordons with their subtrees, then orphan
/// subtrees. Output is a pure function of the model.
pub fn model_to_json(model: &PlantModel) -> Value {
    let node = |id: usize| item_json(model, id);
    json!({
        "schema_version": 1,
        "width": model.scene.width,
        "height": model.scene.height,
        "item_count": model.items.len(),
        "roots": model.roots.iter().map(|r| node(*r)).collect::<Vec<_>>(),
        "orphans": model.orphans.iter().map(|r| node(*r)).collect::<Vec<_>>(),
    })
}

fn item_json(model: &PlantModel, id: usize) -> Value {
    let it = &model.items[id];
    let b = it.instance.bbox;
    json!({
        "id": id,
        "class": it.class().name(),
        "bbox": [b.x0, b.y0, b.x1, b.y1],
        "pixel_count": it.instance.mask.count(),
        "origin_px": point2(it.origin_px),
        "endpoint_px": point2(it.endpoint_px),
        "origin_3d": point3(it.origin_3d),
        "endpoint_3d": point3(it.endpoint_3d),
        "distance_from_parent_px": num(it.distance_from_parent),
        "connection": it.link.map(|l| json!({
            "parent": it.parent,
            "iteration": l.iteration,
            "slot": l.slot,
            "fallback": l.fallback,
        })),
        "flags": it.flags,
        "children": it.children.iter().map(|c| item_json(model, *c)).collect::<Vec<_>>(),
    })
}
