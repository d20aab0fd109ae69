//! Grapevine plant modelling and spur-pruning point generation.
//!
//! The pipeline turns instance masks of five organ classes plus an aligned
//! depth image into a tree-structured plant model, assesses every pruning
//! region hanging from the main cordon, and places oriented pruning points
//! on the organs to cut.
//!
//! ```no_run
//! use std::sync::Arc;
//! use vinecut_core::{assemble_model, assess_all, generate_pruning_points, Execution, PipelineConfig};
//! # fn demo(records: Vec<vinecut_core::InstanceRecord>, depth: vinecut_core::DepthImage, cam: vinecut_core::CameraIntrinsics) -> vinecut_core::Result<()> {
//! let cfg = PipelineConfig::default();
//! let model = assemble_model(&records, Arc::new(depth), &cam, &cfg)?;
//! let regions = assess_all(&model, &cfg, Execution::default());
//! let points = generate_pruning_points(&model, &regions, &cfg);
//! # let _ = points; Ok(()) }
//! ```

pub mod assess;
pub mod camera;
pub mod coco;
pub mod config;
pub mod depth;
pub mod error;
pub mod exec;
pub mod instance;
pub mod json;
pub mod mask;
pub mod model;
pub mod pruning;
pub mod raster;
pub mod rules;
pub mod synthetic;

pub use assess::{assess_all, GrowthDirection, Location, PruningRegion, RegionAssessment};
pub use camera::{deproject, project, CameraIntrinsics, Point3};
pub use coco::{parse_annotations, to_coco_json, AnnotatedScene, ClassMap};
pub use config::{load_config, PipelineConfig};
pub use depth::{estimate_real_depth, load_depth, DepthImage};
pub use error::{Error, Result};
pub use exec::Execution;
pub use instance::{InstanceRecord, OrganClass};
pub use mask::{BBox, Mask, Pixel, Point2};
pub use model::{assemble_model, model_to_json, GrapevineItem, PlantModel};
pub use pruning::{generate_pruning_points, pruning_document, PruningPoint};
pub use rules::{select_cut, CutDecision, CutType};
