//! Pipeline configuration and its flat `key = value` file format.
//!
//! Lines are `key = value`; `#` starts a comment; blank lines are ignored.
//! Absent keys take their defaults, unknown or repeated keys are rejected.
//! [`PipelineConfig::to_kv_string`] writes every key with its unit.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt::Write as _;
use std::path::Path;

use crate::camera::CameraIntrinsics;
use crate::error::{Error, Result};
use crate::instance::OrganClass;
use crate::rules::{default_rules, format_rules, parse_rules, CutRule};

/// Parent/child class pairs the connection search runs over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ConnectionPair {
    CordonArm,
    CordonSpur,
    CordonCane,
    ArmSpur,
    ArmCane,
    SpurCane,
    CaneNode,
}

impl ConnectionPair {
    pub const ALL: [ConnectionPair; 7] = [
        ConnectionPair::CordonArm,
        ConnectionPair::CordonSpur,
        ConnectionPair::CordonCane,
        ConnectionPair::ArmSpur,
        ConnectionPair::ArmCane,
        ConnectionPair::SpurCane,
        ConnectionPair::CaneNode,
    ];

    pub fn key(self) -> &'static str {
        match self {
            ConnectionPair::CordonArm => "cordon_arm",
            ConnectionPair::CordonSpur => "cordon_spur",
            ConnectionPair::CordonCane => "cordon_cane",
            ConnectionPair::ArmSpur => "arm_spur",
            ConnectionPair::ArmCane => "arm_cane",
            ConnectionPair::SpurCane => "spur_cane",
            ConnectionPair::CaneNode => "cane_node",
        }
    }

    pub fn parent(self) -> OrganClass {
        match self {
            ConnectionPair::CordonArm | ConnectionPair::CordonSpur | ConnectionPair::CordonCane => {
                OrganClass::MainCordon
            }
            ConnectionPair::ArmSpur | ConnectionPair::ArmCane => OrganClass::Arm,
            ConnectionPair::SpurCane => OrganClass::Spur,
            ConnectionPair::CaneNode => OrganClass::Cane,
        }
    }

    pub fn child(self) -> OrganClass {
        match self {
            ConnectionPair::CordonArm => OrganClass::Arm,
            ConnectionPair::CordonSpur | ConnectionPair::ArmSpur => OrganClass::Spur,
            ConnectionPair::CordonCane | ConnectionPair::ArmCane | ConnectionPair::SpurCane => OrganClass::Cane,
            ConnectionPair::CaneNode => OrganClass::Node,
        }
    }

    /// The pair connecting `parent` to `child`, if the classes may be linked.
    pub fn between(parent: OrganClass, child: OrganClass) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.parent() == parent && p.child() == child)
    }

    fn index(self) -> usize {
        Self::ALL.iter().position(|p| *p == self).unwrap()
    }

    fn from_key(key: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.key() == key)
    }
}

/// Connection-search parameters for one class pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConnectionParams {
    /// Disc radius applied per dilation step, pixels.
    pub dilation: u32,
    /// Number of dilation steps after the undilated attempt.
    pub max_iter: u32,
    /// Bands the child's bounding box is split into.
    pub n_slots: u32,
    /// Retry against the child's first band when the last-band search fails.
    pub include_top: bool,
}

impl Default for ConnectionParams {
    fn default() -> Self {
        Self { dilation: 3, max_iter: 5, n_slots: 4, include_top: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdjacencyMetric {
    Max,
    Min,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RootSide {
    Left,
    Right,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub alpha_v: f64,
    /// Carried for completeness; location classification uses only the
    /// ventral and dorsal angles.
    pub alpha_i: f64,
    pub alpha_d: f64,
    pub alpha_l: f64,
    pub alpha_c: f64,
    pub vigor_min: f64,
    pub vigor_max: f64,
    pub adjacency_min: f64,
    pub adjacency_metric: AdjacencyMetric,
    pub spur_nodes_n: u32,
    pub cut_offset_d: f64,
    pub correction_max_radius: u32,
    pub depth_window: u32,
    pub root_side: RootSide,
    pub root_band_px: u32,
    pub connections: [ConnectionParams; 7],
    pub pass_order: Vec<ConnectionPair>,
    pub cut_rules: Vec<CutRule>,
    pub camera: Option<CameraIntrinsics>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let mut connections = [ConnectionParams::default(); 7];
        // Nodes sit across their cane rather than hanging from one end, so
        // their overlap lands mid-box: two bands accept either half.
        connections[ConnectionPair::CaneNode.index()].n_slots = 2;
        Self {
            alpha_v: FRAC_PI_2,
            alpha_i: FRAC_PI_2,
            alpha_d: FRAC_PI_2,
            alpha_l: 0.578,
            alpha_c: 0.578,
            vigor_min: 0.006,
            vigor_max: 0.014,
            adjacency_min: 0.10,
            adjacency_metric: AdjacencyMetric::Max,
            spur_nodes_n: 2,
            cut_offset_d: 0.02,
            correction_max_radius: 10,
            depth_window: 2,
            root_side: RootSide::Left,
            root_band_px: 5,
            connections,
            pass_order: ConnectionPair::ALL.to_vec(),
            cut_rules: default_rules(),
            camera: None,
        }
    }
}

/// `(key, unit, description)` for every scalar key; connection keys are
/// `<pair>.dilation|max_iter|n_slots|include_top`.
pub const KEY_DOCS: &[(&str, &str, &str)] = &[
    ("alpha_v", "rad", "ventral sector angle for region location"),
    ("alpha_i", "rad", "intermediate sector angle (not used by the classifier)"),
    ("alpha_d", "rad", "dorsal sector angle for region location"),
    ("alpha_l", "ratio", "max lateral slope |dx|/|dy| of a vertical basal cane"),
    ("alpha_c", "ratio", "max cross slope |dz|/|dy| of a vertical basal cane"),
    ("vigor_min", "m", "thinnest basal cane kept for a spur cut"),
    ("vigor_max", "m", "thickest basal cane kept for a spur cut"),
    ("adjacency_min", "m", "new regions closer than this are removed"),
    ("adjacency_metric", "max|min", "how the two neighbour distances combine"),
    ("spur_nodes_n", "count", "nodes left on the basal cane by a spur cut"),
    ("cut_offset_d", "m", "offset of a cut from its reference point"),
    ("correction_max_radius", "px", "search radius when snapping points onto organs"),
    ("depth_window", "px", "half-width of the median depth window"),
    ("root_side", "left|right", "cordon end the plant grows from"),
    ("root_band_px", "px", "width of the column band locating a cordon origin"),
    ("pass_order", "list", "connection passes, comma separated pair names"),
    ("cut_rules", "list", "decision table, comma separated condition:decision"),
    ("camera.fx", "px", "focal length along x"),
    ("camera.fy", "px", "focal length along y"),
    ("camera.cx", "px", "principal point column"),
    ("camera.cy", "px", "principal point row"),
    ("camera.depth_scale", "m/unit", "meters per stored depth unit"),
];

impl PipelineConfig {
    pub fn connection(&self, pair: ConnectionPair) -> ConnectionParams {
        self.connections[pair.index()]
    }

    pub fn connection_mut(&mut self, pair: ConnectionPair) -> &mut ConnectionParams {
        &mut self.connections[pair.index()]
    }

    pub fn from_kv_str(text: &str) -> Result<Self> {
        let mut cfg = PipelineConfig::default();
        let mut seen = std::collections::BTreeSet::new();
        let mut camera: [Option<f64>; 5] = [None; 5];

        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::config(line, format!("line {}: expected `key = value`", lineno + 1)))?;
            let key = key.trim().to_ascii_lowercase();
            let value = value.trim().trim_matches('"');
            if !seen.insert(key.clone()) {
                return Err(Error::config(key, "given more than once"));
            }
            cfg.apply(&key, value, &mut camera)?;
        }

        match camera {
            [None, None, None, None, None] => {}
            [Some(fx), Some(fy), Some(cx), Some(cy), scale] => {
                cfg.camera = Some(CameraIntrinsics { fx, fy, cx, cy, depth_scale: scale.unwrap_or(0.001) });
            }
            _ => {
                let missing = ["camera.fx", "camera.fy", "camera.cx", "camera.cy"]
                    .iter()
                    .zip(camera)
                    .find(|(_, v)| v.is_none())
                    .map(|(k, _)| *k)
                    .unwrap_or("camera.fx");
                return Err(Error::config(missing, "camera keys must be given together"));
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply(&mut self, key: &str, value: &str, camera: &mut [Option<f64>; 5]) -> Result<()> {
        let num = || -> Result<f64> {
            value
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::config(key, format!("expected a number, got `{value}`")))
        };
        let int = || -> Result<u32> {
            value
                .parse::<u32>()
                .map_err(|_| Error::config(key, format!("expected a non-negative integer, got `{value}`")))
        };
        let boolean = || -> Result<bool> {
            match value {
                "true" => Ok(true),
                "false" => Ok(false),
                _ => Err(Error::config(key, format!("expected true or false, got `{value}`"))),
            }
        };

        match key {
            "alpha_v" => self.alpha_v = num()?,
            "alpha_i" => self.alpha_i = num()?,
            "alpha_d" => self.alpha_d = num()?,
            "alpha_l" => self.alpha_l = num()?,
            "alpha_c" => self.alpha_c = num()?,
            "vigor_min" => self.vigor_min = num()?,
            "vigor_max" => self.vigor_max = num()?,
            "adjacency_min" => self.adjacency_min = num()?,
            "adjacency_metric" => {
                self.adjacency_metric = match value {
                    "max" => AdjacencyMetric::Max,
                    "min" => AdjacencyMetric::Min,
                    _ => return Err(Error::config(key, "expected max or min")),
                }
            }
            "spur_nodes_n" => self.spur_nodes_n = int()?,
            "cut_offset_d" => self.cut_offset_d = num()?,
            "correction_max_radius" => self.correction_max_radius = int()?,
            "depth_window" => self.depth_window = int()?,
            "root_side" => {
                self.root_side = match value {
                    "left" => RootSide::Left,
                    "right" => RootSide::Right,
                    _ => return Err(Error::config(key, "expected left or right")),
                }
            }
            "root_band_px" => self.root_band_px = int()?,
            "pass_order" => {
                self.pass_order = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| {
                        ConnectionPair::from_key(s)
                            .ok_or_else(|| Error::config(key, format!("unknown connection pair `{s}`")))
                    })
                    .collect::<Result<_>>()?
            }
            "cut_rules" => self.cut_rules = parse_rules(value)?,
            "camera.fx" => camera[0] = Some(num()?),
            "camera.fy" => camera[1] = Some(num()?),
            "camera.cx" => camera[2] = Some(num()?),
            "camera.cy" => camera[3] = Some(num()?),
            "camera.depth_scale" => camera[4] = Some(num()?),
            _ => {
                let (pair, field) = key
                    .split_once('.')
                    .and_then(|(p, f)| ConnectionPair::from_key(p).map(|p| (p, f)))
                    .ok_or_else(|| Error::config(key, "unknown key"))?;
                let params = self.connection_mut(pair);
                match field {
                    "dilation" => params.dilation = int()?,
                    "max_iter" => params.max_iter = int()?,
                    "n_slots" => params.n_slots = int()?,
                    "include_top" => params.include_top = boolean()?,
                    _ => return Err(Error::config(key, "unknown key")),
                }
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        for (key, v) in [("alpha_v", self.alpha_v), ("alpha_i", self.alpha_i), ("alpha_d", self.alpha_d)] {
            if !(v > 0.0 && v <= PI) {
                return Err(Error::config(key, format!("angle {v} outside (0, pi]")));
            }
        }
        for (key, v) in [
            ("alpha_l", self.alpha_l),
            ("alpha_c", self.alpha_c),
            ("vigor_min", self.vigor_min),
            ("adjacency_min", self.adjacency_min),
            ("cut_offset_d", self.cut_offset_d),
        ] {
            if v.is_nan() || v < 0.0 {
                return Err(Error::config(key, format!("must be >= 0, got {v}")));
            }
        }
        if self.vigor_min.partial_cmp(&self.vigor_max) != Some(std::cmp::Ordering::Less) {
            return Err(Error::config("vigor_max", "must exceed vigor_min"));
        }
        if self.spur_nodes_n < 1 {
            return Err(Error::config("spur_nodes_n", "must be at least 1"));
        }
        if self.root_band_px < 1 {
            return Err(Error::config("root_band_px", "must be at least 1"));
        }
        for pair in ConnectionPair::ALL {
            let p = self.connection(pair);
            if p.n_slots < 2 {
                return Err(Error::config(format!("{}.n_slots", pair.key()), "must be at least 2"));
            }
            if p.dilation < 1 {
                return Err(Error::config(format!("{}.dilation", pair.key()), "must be at least 1"));
            }
        }
        let mut order = self.pass_order.clone();
        order.sort();
        order.dedup();
        if order.len() != self.pass_order.len() {
            return Err(Error::config("pass_order", "lists a pair more than once"));
        }
        if let Some(cam) = &self.camera {
            cam.validate()?;
        }
        Ok(())
    }

    /// Every key with its current value, preceded by a unit comment.
    pub fn to_kv_string(&self) -> String {
        let mut out = String::new();
        let mut put = |key: &str, value: String| {
            if let Some((_, unit, doc)) = KEY_DOCS.iter().find(|(k, _, _)| *k == key) {
                let _ = writeln!(out, "# {doc} [{unit}]");
            }
            let _ = writeln!(out, "{key} = {value}");
        };
        put("alpha_v", self.alpha_v.to_string());
        put("alpha_i", self.alpha_i.to_string());
        put("alpha_d", self.alpha_d.to_string());
        put("alpha_l", self.alpha_l.to_string());
        put("alpha_c", self.alpha_c.to_string());
        put("vigor_min", self.vigor_min.to_string());
        put("vigor_max", self.vigor_max.to_string());
        put("adjacency_min", self.adjacency_min.to_string());
        put(
            "adjacency_metric",
            match self.adjacency_metric {
                AdjacencyMetric::Max => "max",
                AdjacencyMetric::Min => "min",
            }
            .into(),
        );
        put("spur_nodes_n", self.spur_nodes_n.to_string());
        put("cut_offset_d", self.cut_offset_d.to_string());
        put("correction_max_radius", self.correction_max_radius.to_string());
        put("depth_window", self.depth_window.to_string());
        put(
            "root_side",
            match self.root_side {
                RootSide::Left => "left",
                RootSide::Right => "right",
            }
            .into(),
        );
        put("root_band_px", self.root_band_px.to_string());
        put("pass_order", self.pass_order.iter().map(|p| p.key()).collect::<Vec<_>>().join(", "));
        put("cut_rules", format_rules(&self.cut_rules));
        for pair in ConnectionPair::ALL {
            let p = self.connection(pair);
            put(&format!("{}.dilation", pair.key()), p.dilation.to_string());
            put(&format!("{}.max_iter", pair.key()), p.max_iter.to_string());
            put(&format!("{}.n_slots", pair.key()), p.n_slots.to_string());
            put(&format!("{}.include_top", pair.key()), p.include_top.to_string());
        }
        if let Some(cam) = &self.camera {
            put("camera.fx", cam.fx.to_string());
            put("camera.fy", cam.fy.to_string());
            put("camera.cx", cam.cx.to_string());
            put("camera.cy", cam.cy.to_string());
            put("camera.depth_scale", cam.depth_scale.to_string());
        }
        out
    }
}

pub fn load_config(path: &Path) -> Result<PipelineConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    PipelineConfig::from_kv_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_default() {
        assert_eq!(PipelineConfig::from_kv_str("").unwrap(), PipelineConfig::default());
        assert_eq!(PipelineConfig::from_kv_str("# only a comment\n\n").unwrap(), PipelineConfig::default());
    }

    #[test]
    fn out_of_range_angle_names_key() {
        let err = PipelineConfig::from_kv_str("alpha_D = 4.0").unwrap_err();
        assert!(matches!(err, Error::Config { ref key, .. } if key == "alpha_d"));
        assert!(err.to_string().contains("outside (0, pi]"));
        let err = PipelineConfig::from_kv_str("alpha_d = 4.0").unwrap_err();
        assert!(matches!(err, Error::Config { ref key, .. } if key == "alpha_d"));
    }

    #[test]
    fn passthrough_value() {
        let cfg = PipelineConfig::from_kv_str("cut_offset_d = 0.08").unwrap();
        assert_eq!(cfg.cut_offset_d, 0.08);
    }

    #[test]
    fn unknown_and_repeated_keys_rejected() {
        assert!(PipelineConfig::from_kv_str("colour = red").is_err());
        assert!(PipelineConfig::from_kv_str("cane_node.radius = 3").is_err());
        assert!(PipelineConfig::from_kv_str("spur_nodes_n = 2\nspur_nodes_n = 3").is_err());
    }

    #[test]
    fn invariants_checked() {
        assert!(PipelineConfig::from_kv_str("vigor_min = 0.02").is_err());
        assert!(PipelineConfig::from_kv_str("spur_cane.n_slots = 1").is_err());
        assert!(PipelineConfig::from_kv_str("spur_nodes_n = 0").is_err());
        assert!(PipelineConfig::from_kv_str("camera.fx = 600").is_err());
        assert!(PipelineConfig::from_kv_str("camera.fx = -1\ncamera.fy = 600\ncamera.cx = 1\ncamera.cy = 1").is_err());
    }

    #[test]
    fn connection_and_camera_keys() {
        let text = "arm_cane.include_top = false\ncordon_spur.max_iter = 7\n\
                    camera.fx = 600\ncamera.fy = 610\ncamera.cx = 320\ncamera.cy = 240\n\
                    pass_order = spur_cane, cane_node";
        let cfg = PipelineConfig::from_kv_str(text).unwrap();
        assert!(!cfg.connection(ConnectionPair::ArmCane).include_top);
        assert_eq!(cfg.connection(ConnectionPair::CordonSpur).max_iter, 7);
        assert_eq!(cfg.camera.unwrap().fy, 610.0);
        assert_eq!(cfg.camera.unwrap().depth_scale, 0.001);
        assert_eq!(cfg.pass_order, vec![ConnectionPair::SpurCane, ConnectionPair::CaneNode]);
    }

    #[test]
    fn written_config_parses_back() {
        let mut cfg = PipelineConfig {
            alpha_d: 1.234_567_891_011,
            adjacency_metric: AdjacencyMetric::Min,
            ..PipelineConfig::default()
        };
        cfg.connection_mut(ConnectionPair::SpurCane).include_top = false;
        cfg.camera = Some(CameraIntrinsics { fx: 600.0, fy: 600.0, cx: 319.5, cy: 239.5, depth_scale: 0.001 });
        let text = cfg.to_kv_string();
        assert!(text.contains("# dorsal sector angle for region location [rad]"));
        assert_eq!(PipelineConfig::from_kv_str(&text).unwrap(), cfg);
    }
}
