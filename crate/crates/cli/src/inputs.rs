//! Loading the files a command needs.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use seglep::calibrate::Sample;
use seglep::cues::Cues;
use seglep::pipeline::{compute_cues, PipelineConfig};
use seglep::raster::{
    load_contour_map, load_image, load_label_map, load_semantic_map, ContourMap, LabelMap,
    RasterImage, SemanticMap,
};

/// A problem with the command's inputs rather than with the program.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct InputError(pub String);

pub fn input_error(msg: impl Into<String>) -> anyhow::Error {
    InputError(msg.into()).into()
}

pub struct Inputs {
    pub image: RasterImage,
    pub semantic: SemanticMap,
    pub contour: Option<ContourMap>,
}

impl Inputs {
    pub fn load(image: &Path, semmap: &Path, contour: Option<&Path>) -> Result<Self> {
        if image.as_os_str().is_empty() {
            return Err(input_error("--image is empty"));
        }
        let image = load_image(image).with_context(|| format!("reading {}", image.display()))?;
        let semantic =
            load_semantic_map(semmap).with_context(|| format!("reading {}", semmap.display()))?;
        let contour = contour
            .map(|p| load_contour_map(p).with_context(|| format!("reading {}", p.display())))
            .transpose()?;
        Ok(Self {
            image,
            semantic,
            contour,
        })
    }

    pub fn cues(&self, cfg: &PipelineConfig) -> Result<Cues> {
        Ok(compute_cues(
            &self.image,
            &self.semantic,
            self.contour.as_ref(),
            &cfg.cues,
        )?)
    }
}

pub fn load_config(path: Option<&Path>) -> Result<PipelineConfig> {
    match path {
        Some(p) => PipelineConfig::load(p).with_context(|| format!("reading {}", p.display())),
        None => Ok(PipelineConfig::default()),
    }
}

/// Label maps with the given extension in `dir`, sorted by file name.
pub fn list_files(dir: &Path, ext: &str) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir)
        .map_err(|e| input_error(format!("cannot read directory {}: {e}", dir.display())))?;
    let mut out = Vec::new();
    for entry in entries {
        let path = entry?.path();
        if path.is_file() && path.extension().is_some_and(|e| e == ext) {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

pub fn load_truths(dir: &Path) -> Result<Vec<LabelMap>> {
    let files = list_files(dir, "pgm")?;
    if files.is_empty() {
        return Err(input_error(format!(
            "no annotator maps (*.pgm) in {}",
            dir.display()
        )));
    }
    files
        .iter()
        .map(|f| load_label_map(f).with_context(|| format!("reading {}", f.display())))
        .collect()
}

fn load_sample(dir: &Path, cfg: &PipelineConfig) -> Result<Sample> {
    let contour = ["contour.bin", "contour.pgm"]
        .iter()
        .map(|n| dir.join(n))
        .find(|p| p.exists());
    let inputs = Inputs::load(
        &dir.join("image.ppm"),
        &dir.join("semmap.bin"),
        contour.as_deref(),
    )?;
    Ok(Sample {
        cues: inputs.cues(cfg)?,
        truths: load_truths(&dir.join("gt"))?,
    })
}

/// Every subdirectory of `root` is one training sample, in name order.
pub fn load_train_set(root: &Path, cfg: &PipelineConfig) -> Result<Vec<Sample>> {
    let entries = fs::read_dir(root)
        .map_err(|e| input_error(format!("cannot read directory {}: {e}", root.display())))?;
    let mut dirs = Vec::new();
    for entry in entries {
        let path = entry?.path();
        if path.is_dir() {
            dirs.push(path);
        }
    }
    dirs.sort();
    if dirs.is_empty() {
        return Err(input_error(format!(
            "no sample directories in {}",
            root.display()
        )));
    }
    dirs.iter()
        .map(|d| load_sample(d, cfg).with_context(|| format!("sample {}", d.display())))
        .collect()
}
