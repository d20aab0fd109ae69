//! Command-line driver for the vinecut pipeline.
//!
//! `run` processes one annotated scene, `bench` scores the pipeline on
//! synthetic scene grids and `synth` writes a synthetic scene to disk.

pub mod bench;
pub mod output;
pub mod overlay;
pub mod run;
pub mod synth;

pub use bench::{cmd_bench, BenchArgs};
pub use overlay::render_overlay;
pub use run::{cmd_run, RunArgs, RunManifest};
