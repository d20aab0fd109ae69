use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::{rasterize_polygons, BBox, Mask};

/// The five annotated grapevine organ classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrganClass {
    MainCordon,
    Arm,
    Spur,
    Cane,
    Node,
}

impl OrganClass {
    pub const ALL: [OrganClass; 5] =
        [OrganClass::MainCordon, OrganClass::Arm, OrganClass::Spur, OrganClass::Cane, OrganClass::Node];

    pub fn name(self) -> &'static str {
        match self {
            OrganClass::MainCordon => "main_cordon",
            OrganClass::Arm => "arm",
            OrganClass::Spur => "spur",
            OrganClass::Cane => "cane",
            OrganClass::Node => "node",
        }
    }

    /// Classes that may appear as children of `self` in the plant tree.
    pub fn allowed_children(self) -> &'static [OrganClass] {
        match self {
            OrganClass::MainCordon => &[OrganClass::Arm, OrganClass::Spur, OrganClass::Cane],
            OrganClass::Arm => &[OrganClass::Spur, OrganClass::Cane],
            OrganClass::Spur => &[OrganClass::Cane],
            OrganClass::Cane => &[OrganClass::Node],
            OrganClass::Node => &[],
        }
    }

    pub fn can_parent(self, child: OrganClass) -> bool {
        self.allowed_children().contains(&child)
    }
}

impl fmt::Display for OrganClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OrganClass {
    type Err = Error;

    /// Accepts the class names in any case, with spaces, `_` or `-` as separators.
    fn from_str(s: &str) -> Result<Self> {
        let key: String = s.chars().filter(|c| c.is_alphanumeric()).flat_map(char::to_lowercase).collect();
        match key.as_str() {
            "maincordon" => Ok(OrganClass::MainCordon),
            "arm" => Ok(OrganClass::Arm),
            "spur" => Ok(OrganClass::Spur),
            "cane" => Ok(OrganClass::Cane),
            "node" => Ok(OrganClass::Node),
            _ => Err(Error::ClassMap(s.to_string())),
        }
    }
}

/// One annotated or detected organ instance.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceRecord {
    /// Dense scene-local ID, `0..k`.
    pub instance_id: usize,
    pub organ_class: OrganClass,
    /// Closed rings in pixel coordinates.
    pub polygons: Vec<Vec<[f64; 2]>>,
    pub mask: Mask,
    pub bbox: BBox,
}

impl InstanceRecord {
    /// Rasterize `polygons` into a `width` x `height` mask.
    pub fn from_polygons(
        instance_id: usize,
        organ_class: OrganClass,
        polygons: Vec<Vec<[f64; 2]>>,
        width: u32,
        height: u32,
    ) -> Result<Self> {
        let mask = rasterize_polygons(&polygons, width, height)?;
        Self::with_mask(instance_id, organ_class, polygons, mask)
    }

    pub fn with_mask(
        instance_id: usize,
        organ_class: OrganClass,
        polygons: Vec<Vec<[f64; 2]>>,
        mask: Mask,
    ) -> Result<Self> {
        let bbox = mask
            .bbox()
            .ok_or_else(|| Error::Geometry(format!("instance {instance_id} ({organ_class}) covers no pixels")))?;
        Ok(Self { instance_id, organ_class, polygons, mask, bbox })
    }
}

/// Ring for an inclusive pixel rectangle, which rasterizes back to exactly `rect`.
pub fn rect_ring(rect: BBox) -> Vec<[f64; 2]> {
    let (x0, y0, x1, y1) = (rect.x0 as f64, rect.y0 as f64, rect.x1 as f64, rect.y1 as f64);
    vec![[x0, y0], [x1, y0], [x1, y1], [x0, y1]]
}
