//! COCO instance-segmentation JSON, polygon form only.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::instance::{InstanceRecord, OrganClass};

/// Category name to organ class mapping.
///
/// The five class names are always recognised (case and separator
/// insensitive). Extra aliases can be registered for datasets that use other
/// labels; any other category name is rejected.
#[derive(Debug, Clone, Default)]
pub struct ClassMap {
    aliases: BTreeMap<String, OrganClass>,
}

impl ClassMap {
    pub fn with_alias(mut self, name: &str, class: OrganClass) -> Self {
        self.aliases.insert(name.to_string(), class);
        self
    }

    pub fn resolve(&self, name: &str) -> Result<OrganClass> {
        match self.aliases.get(name) {
            Some(c) => Ok(*c),
            None => name.parse(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CocoFile {
    images: Vec<CocoImage>,
    annotations: Vec<CocoAnnotation>,
    categories: Vec<CocoCategory>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CocoImage {
    pub id: u64,
    pub width: u32,
    pub height: u32,
    #[serde(default)]
    pub file_name: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CocoAnnotation {
    id: u64,
    image_id: u64,
    category_id: u64,
    segmentation: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    area: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bbox: Option<[f64; 4]>,
    #[serde(default)]
    iscrowd: u8,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CocoCategory {
    id: u64,
    name: String,
}

/// Instances of one image, ready for modelling.
#[derive(Debug, Clone)]
pub struct AnnotatedScene {
    pub image: CocoImage,
    pub records: Vec<InstanceRecord>,
}

impl AnnotatedScene {
    pub fn dimensions(&self) -> (u32, u32) {
        (self.image.width, self.image.height)
    }
}

/// Parse COCO JSON into instance records for a single image.
///
/// When the file holds several images, `select` must name one of them by
/// numeric ID or file name. Annotation IDs are re-mapped to dense instance
/// IDs in ascending annotation-ID order.
pub fn parse_annotations(json: &[u8], class_map: &ClassMap, select: Option<&str>) -> Result<AnnotatedScene> {
    let file: CocoFile = serde_json::from_slice(json)?;

    let mut classes = BTreeMap::new();
    for cat in &file.categories {
        classes.insert(cat.id, class_map.resolve(&cat.name)?);
    }

    let image = pick_image(&file.images, select)?;
    let mut anns: Vec<&CocoAnnotation> = file.annotations.iter().filter(|a| a.image_id == image.id).collect();
    anns.sort_by_key(|a| a.id);

    let records = anns
        .iter()
        .enumerate()
        .map(|(dense, ann)| {
            let class = *classes
                .get(&ann.category_id)
                .ok_or_else(|| Error::ClassMap(format!("category id {} (annotation {})", ann.category_id, ann.id)))?;
            let polygons = decode_polygons(&ann.segmentation, ann.id)?;
            InstanceRecord::from_polygons(dense, class, polygons, image.width, image.height)
                .map_err(|e| Error::Geometry(format!("annotation {}: {e}", ann.id)))
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(AnnotatedScene { image: image.clone(), records })
}

fn pick_image<'a>(images: &'a [CocoImage], select: Option<&str>) -> Result<&'a CocoImage> {
    match (images, select) {
        ([], _) => Err(Error::Usage("annotation file lists no images".into())),
        (_, Some(key)) => images
            .iter()
            .find(|im| im.id.to_string() == key || im.file_name == key)
            .ok_or_else(|| Error::Usage(format!("no image with id or file name `{key}`"))),
        ([one], None) => Ok(one),
        (many, None) => {
            let names: Vec<String> = many.iter().take(5).map(|im| format!("{} (id {})", im.file_name, im.id)).collect();
            Err(Error::Usage(format!(
                "annotation file lists {} images; select one, e.g. {}",
                many.len(),
                names.join(", ")
            )))
        }
    }
}

fn decode_polygons(seg: &Value, ann_id: u64) -> Result<Vec<Vec<[f64; 2]>>> {
    let rings = match seg {
        Value::Array(rings) => rings,
        Value::Object(_) => {
            return Err(Error::Usage(format!(
                "annotation {ann_id} uses an RLE mask; only polygon segmentations are supported"
            )))
        }
        _ => return Err(Error::Geometry(format!("annotation {ann_id} has malformed segmentation"))),
    };
    if rings.is_empty() {
        return Err(Error::Geometry(format!("annotation {ann_id} has no polygons")));
    }
    rings
        .iter()
        .map(|ring| {
            let coords: Vec<f64> = ring
                .as_array()
                .ok_or_else(|| Error::Geometry(format!("annotation {ann_id}: polygon is not an array")))?
                .iter()
                .map(|v| {
                    v.as_f64().ok_or_else(|| Error::Geometry(format!("annotation {ann_id}: non-numeric coordinate")))
                })
                .collect::<Result<_>>()?;
            if !coords.len().is_multiple_of(2) || coords.len() < 6 {
                return Err(Error::Geometry(format!(
                    "annotation {ann_id}: polygon with {} coordinates (need an even count >= 6)",
                    coords.len()
                )));
            }
            Ok(coords.chunks_exact(2).map(|c| [c[0], c[1]]).collect())
        })
        .collect()
}

/// Serialize records as a single-image COCO file.
///
/// Category IDs are 1..=5 in class order; annotation IDs are `instance_id + 1`.
pub fn to_coco_json(records: &[InstanceRecord], width: u32, height: u32, file_name: &str) -> Result<String> {
    let categories = OrganClass::ALL
        .iter()
        .enumerate()
        .map(|(i, c)| CocoCategory { id: i as u64 + 1, name: c.name().to_string() })
        .collect();
    let annotations = records
        .iter()
        .map(|r| {
            let category_id = OrganClass::ALL.iter().position(|c| *c == r.organ_class).unwrap() as u64 + 1;
            let segmentation = Value::Array(
                r.polygons
                    .iter()
                    .map(|ring| Value::Array(ring.iter().flat_map(|[x, y]| [json_num(*x), json_num(*y)]).collect()))
                    .collect(),
            );
            CocoAnnotation {
                id: r.instance_id as u64 + 1,
                image_id: 1,
                category_id,
                segmentation,
                area: Some(r.mask.count() as f64),
                bbox: Some([r.bbox.x0 as f64, r.bbox.y0 as f64, r.bbox.width() as f64, r.bbox.height() as f64]),
                iscrowd: 0,
            }
        })
        .collect();
    let file = CocoFile {
        images: vec![CocoImage { id: 1, width, height, file_name: file_name.to_string() }],
        annotations,
        categories,
    };
    Ok(serde_json::to_string_pretty(&file)?)
}

fn json_num(v: f64) -> Value {
    serde_json::Number::from_f64(v).map(Value::Number).unwrap_or(Value::Null)
}
