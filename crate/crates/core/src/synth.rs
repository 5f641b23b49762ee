//! Synthetic scenes with known ground truth: a two-tone background with
//! discs and boxes on top, a noisy semantic map and a contour map.

use rand::Rng;

use crate::raster::{ContourMap, LabelMap, RasterImage, SemanticMap};

pub const SCENE_CATEGORIES: [&str; 3] = ["background", "disc", "box"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    pub shapes: usize,
    /// Per-channel uniform noise amplitude, in 8-bit levels.
    pub color_noise: f64,
    /// Probability that a pixel's semantic vector favors a wrong category.
    pub label_flip: f64,
    /// Probability mass on the favored category.
    pub confidence: f64,
    /// Strength written on true boundaries in the contour map.
    pub contour: f64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            width: 48,
            height: 48,
            shapes: 3,
            color_noise: 6.0,
            label_flip: 0.1,
            confidence: 0.7,
            contour: 0.8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Scene {
    pub image: RasterImage,
    pub semantic: SemanticMap,
    pub contour: ContourMap,
    /// Ground-truth regions, 4-connected, ids in raster order.
    pub truth: LabelMap,
    /// Ground-truth category index of every pixel.
    pub categories: LabelMap,
}

fn random_color<R: Rng>(rng: &mut R) -> [u8; 3] {
    [rng.gen(), rng.gen(), rng.gen()]
}

pub fn scene<R: Rng>(spec: &SceneSpec, rng: &mut R) -> Scene {
    let (w, h) = (spec.width.max(1), spec.height.max(1));
    let horizon = ((h as f64) * rng.gen_range(0.35..0.65)) as usize;
    let sky = random_color(rng);
    let ground = random_color(rng);
    let mut region: Vec<u32> = (0..w * h).map(|p| (p / w >= horizon) as u32).collect();
    let mut color: Vec<[u8; 3]> = region
        .iter()
        .map(|&r| if r == 0 { sky } else { ground })
        .collect();
    let mut category = vec![0u32; w * h];
    let span = w.min(h) as f64;
    for i in 0..spec.shapes {
        let disc = rng.gen_bool(0.5);
        let (cx, cy) = (rng.gen_range(0.0..w as f64), rng.gen_range(0.0..h as f64));
        let (rx, ry) = (
            span * rng.gen_range(0.1..0.25),
            span * rng.gen_range(0.1..0.25),
        );
        let fill = random_color(rng);
        for y in 0..h {
            for x in 0..w {
                let (dx, dy) = ((x as f64 + 0.5 - cx) / rx, (y as f64 + 0.5 - cy) / ry);
                let inside = if disc {
                    dx * dx + dy * dy <= 1.0
                } else {
                    dx.abs() <= 1.0 && dy.abs() <= 1.0
                };
                if inside {
                    let p = y * w + x;
                    region[p] = 2 + i as u32;
                    color[p] = fill;
                    category[p] = if disc { 1 } else { 2 };
                }
            }
        }
    }
    let truth = LabelMap::new(w, h, region)
        .expect("grid sized")
        .connected_components();
    let amp = spec.color_noise.max(0.0);
    let pixels = color
        .iter()
        .map(|c| {
            c.map(|v| {
                let n = if amp > 0.0 {
                    rng.gen_range(-amp..=amp)
                } else {
                    0.0
                };
                (v as f64 + n).round().clamp(0.0, 255.0) as u8
            })
        })
        .collect();
    let image = RasterImage::new(w, h, pixels).expect("grid sized");

    let n_cat = SCENE_CATEGORIES.len();
    let conf = spec.confidence.clamp(0.0, 1.0) as f32;
    let rest = (1.0 - conf) / (n_cat - 1) as f32;
    let mut probs = Vec::with_capacity(w * h * n_cat);
    for &c in &category {
        let favored = if rng.gen_bool(spec.label_flip.clamp(0.0, 1.0)) {
            (c as usize + rng.gen_range(1..n_cat)) % n_cat
        } else {
            c as usize
        };
        probs.extend((0..n_cat).map(|l| if l == favored { conf } else { rest }));
    }
    let names = SCENE_CATEGORIES.iter().map(|s| s.to_string()).collect();
    let semantic = SemanticMap::new(w, h, names, probs).expect("valid scene categories");

    let t = truth.labels();
    let strength = (0..w * h)
        .map(|p| {
            let (x, y) = (p % w, p / w);
            let edge = (x > 0 && t[p - 1] != t[p])
                || (x + 1 < w && t[p + 1] != t[p])
                || (y > 0 && t[p - w] != t[p])
                || (y + 1 < h && t[p + w] != t[p]);
            if edge {
                spec.contour.clamp(0.0, 1.0) as f32
            } else {
                0.0
            }
        })
        .collect();
    let contour = ContourMap::new(w, h, strength).expect("strengths in range");
    let categories = LabelMap::new(w, h, category).expect("grid sized");
    Scene {
        image,
        semantic,
        contour,
        truth,
        categories,
    }
}
