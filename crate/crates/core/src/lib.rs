//! Hierarchical image segmentation by greedy merging under a unit merging
//! cost that fuses color, texture, contour regularity and dense semantic
//! probabilities.
//!
//! The pipeline runs [`cues`] over the inputs, drives the [`engine`] to a
//! stop threshold (or a single region), turns the merge log into nested
//! segmentations with [`hierarchy`], and scores them with [`metrics`].

pub mod calibrate;
pub mod cues;
pub mod engine;
pub mod hierarchy;
pub mod metrics;
pub mod pipeline;
pub mod raster;
pub mod synth;

pub use engine::{EngineConfig, EtaPrior, MergeEvent, MergeState, RunOutput};
pub use raster::{ContourMap, LabelMap, RasterImage, SemanticMap};
