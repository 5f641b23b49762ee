//! End-to-end helpers shared by the command line, the browser demo and
//! calibration.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cues::{CueConfig, CueError, Cues};
use crate::engine::{EngineConfig, EngineError, MergeState, RunOutput};
use crate::hierarchy::{HierarchyError, MergeHierarchy};
use crate::metrics::MetricError;
use crate::raster::{ContourMap, RasterError, RasterImage, SemanticMap};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error(transparent)]
    Cue(#[from] CueError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Hierarchy(#[from] HierarchyError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("configuration: {0}")]
    Config(String),
}

/// Engine parameters by name at the top level, cue parameters under `cues`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PipelineConfig {
    #[serde(flatten)]
    pub engine: EngineConfig,
    #[serde(default)]
    pub cues: CueConfig,
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self, PipelineError> {
        let cfg: Self =
            serde_json::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        cfg.engine.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PipelineError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => RasterError::FileMissing(path.to_path_buf()),
            _ => RasterError::IoFailure(e),
        })?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), PipelineError> {
        let mut text = self.to_json();
        text.push('\n');
        std::fs::write(path, text).map_err(RasterError::IoFailure)?;
        Ok(())
    }
}

/// Cue channels for one input triple. A missing contour map counts as all
/// zero.
pub fn compute_cues(
    image: &RasterImage,
    semantic: &SemanticMap,
    contour: Option<&ContourMap>,
    cfg: &CueConfig,
) -> Result<Cues, PipelineError> {
    let zeros;
    let contour = match contour {
        Some(c) => c,
        None => {
            zeros = ContourMap::zeros(image.width(), image.height());
            &zeros
        }
    };
    Ok(Cues::compute(image, semantic, contour, cfg)?)
}

/// Merges up to the configured stop threshold.
pub fn segment(cues: &Cues, cfg: &EngineConfig) -> Result<RunOutput, PipelineError> {
    Ok(MergeState::new(cues, *cfg)?.run())
}

/// Runs to a single region and indexes the full merge log.
pub fn full_hierarchy(
    cues: &Cues,
    cfg: &EngineConfig,
) -> Result<(RunOutput, MergeHierarchy), PipelineError> {
    let cfg = EngineConfig {
        lambda_stop: None,
        ..*cfg
    };
    let out = MergeState::new(cues, cfg)?.run();
    let h = MergeHierarchy::new(out.labels.width(), out.labels.height(), &out.events)?;
    Ok((out, h))
}
