//! Browser demo: generate a synthetic scene, build its merge hierarchy once,
//! then threshold and reweight interactively.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use seglep::cues::{CueConfig, Cues};
use seglep::engine::{EngineConfig, EtaPrior};
use seglep::hierarchy::{extract_semantic, MergeHierarchy};
use seglep::pipeline::{compute_cues, full_hierarchy};
use seglep::raster::{overlay, LabelMap};
use seglep::synth::{scene, Scene, SceneSpec};
use wasm_bindgen::prelude::*;

const CATEGORY_COLORS: [[u8; 3]; 3] = [[70, 70, 70], [230, 160, 40], [60, 140, 230]];

fn rgba(pixels: &[[u8; 3]]) -> Vec<u8> {
    pixels
        .iter()
        .flat_map(|&[r, g, b]| [r, g, b, 255])
        .collect()
}

#[wasm_bindgen]
pub struct Demo {
    scene: Scene,
    cues: Cues,
    config: EngineConfig,
    hierarchy: MergeHierarchy,
}

#[wasm_bindgen]
impl Demo {
    /// Generates a scene and runs it to a single region.
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u64, width: usize, height: usize, label_flip: f64) -> Result<Demo, String> {
        let spec = SceneSpec {
            width: width.clamp(8, 256),
            height: height.clamp(8, 256),
            label_flip: label_flip.clamp(0.0, 0.5),
            ..Default::default()
        };
        let scene = scene(&spec, &mut ChaCha8Rng::seed_from_u64(seed));
        let cues = compute_cues(
            &scene.image,
            &scene.semantic,
            Some(&scene.contour),
            &CueConfig::default(),
        )
        .map_err(|e| e.to_string())?;
        let config = EngineConfig::default();
        let (_, hierarchy) = full_hierarchy(&cues, &config).map_err(|e| e.to_string())?;
        Ok(Demo {
            scene,
            cues,
            config,
            hierarchy,
        })
    }

    pub fn width(&self) -> usize {
        self.scene.image.width()
    }

    pub fn height(&self) -> usize {
        self.scene.image.height()
    }

    /// Highest merge level; thresholds above it give one region.
    pub fn max_level(&self) -> f64 {
        self.hierarchy.levels().last().copied().unwrap_or(0.0)
    }

    pub fn image_rgba(&self) -> Vec<u8> {
        rgba(self.scene.image.pixels())
    }

    pub fn regions(&self, lambda: f64) -> usize {
        self.hierarchy.threshold(lambda).region_count()
    }

    /// Region boundaries at `lambda` painted over the image.
    pub fn segment_rgba(&self, lambda: f64) -> Result<Vec<u8>, String> {
        let seg = self.hierarchy.threshold(lambda);
        let out = overlay(&self.scene.image, &seg).map_err(|e| e.to_string())?;
        Ok(rgba(out.pixels()))
    }

    /// Category chosen per region at `lambda`.
    pub fn semantic_rgba(&self, lambda: f64) -> Result<Vec<u8>, String> {
        let seg = self.hierarchy.threshold(lambda);
        let sem = extract_semantic(&seg, &self.cues.semantic).map_err(|e| e.to_string())?;
        let colors: Vec<[u8; 3]> = sem
            .categories
            .iter()
            .map(|&c| CATEGORY_COLORS[c as usize % CATEGORY_COLORS.len()])
            .collect();
        Ok(rgba(&colors))
    }

    /// Category of the noisy per-pixel input, for comparison.
    pub fn input_semantic_rgba(&self) -> Vec<u8> {
        let sem = &self.scene.semantic;
        let colors: Vec<[u8; 3]> = (0..self.width() * self.height())
            .map(|p| {
                let probs = sem.pixel(p);
                let best = (0..probs.len()).fold(0, |b, k| if probs[k] > probs[b] { k } else { b });
                CATEGORY_COLORS[best % CATEGORY_COLORS.len()]
            })
            .collect();
        rgba(&colors)
    }

    /// Ultrametric contour map on the doubled grid, scaled to 8 bits.
    pub fn ucm_rgba(&self) -> Result<Vec<u8>, String> {
        let ucm = self.hierarchy.build_ucm().map_err(|e| e.to_string())?;
        let top = ucm.values.iter().copied().fold(0.0f32, f32::max);
        let scale = if top > 0.0 { 255.0 / top } else { 0.0 };
        let gray: Vec<[u8; 3]> = ucm
            .values
            .iter()
            .map(|&v| {
                let g = 255 - (v * scale).round().clamp(0.0, 255.0) as u8;
                [g, g, g]
            })
            .collect();
        Ok(rgba(&gray))
    }

    /// Rebuilds the hierarchy with a new semantic weight, gate midpoint and
    /// background prior.
    pub fn reweight(&mut self, w_s: f64, beta: f64, eta: f64) -> Result<(), String> {
        let config = EngineConfig {
            w_s,
            beta,
            eta_prior: EtaPrior::Constant { eta },
            ..self.config
        };
        let (_, hierarchy) = full_hierarchy(&self.cues, &config).map_err(|e| e.to_string())?;
        self.config = config;
        self.hierarchy = hierarchy;
        Ok(())
    }

    /// Fraction of pixels whose region category matches the scene truth.
    pub fn semantic_accuracy(&self, lambda: f64) -> Result<f64, String> {
        let seg = self.hierarchy.threshold(lambda);
        let sem = extract_semantic(&seg, &self.cues.semantic).map_err(|e| e.to_string())?;
        Ok(agreement(&sem.to_label_map(), &self.scene.categories))
    }
}

fn agreement(a: &LabelMap, b: &LabelMap) -> f64 {
    let same = a
        .labels()
        .iter()
        .zip(b.labels())
        .filter(|(x, y)| x == y)
        .count();
    same as f64 / a.labels().len().max(1) as f64
}
