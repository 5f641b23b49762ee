//! Per-pixel cue channels consumed by the merge engine.

mod pca_tree;
mod texton;

pub use pca_tree::{pca_tree_cluster, ClusterAssignment};
pub use texton::{filter_responses, FILTER_COUNT};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster::{ContourMap, RasterImage, SemanticMap};

#[derive(Debug, Error, PartialEq)]
pub enum CueError {
    #[error("dimension mismatch: image is {image:?}, other input is {other:?}")]
    DimensionMismatch {
        image: (usize, usize),
        other: (usize, usize),
    },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Step to which per-pixel semantic costs are rounded. Sums of costs on this
/// grid are exact in `f64` for any summation order, so region statistics are
/// independent of the merge history.
pub const COST_QUANTUM: f64 = 1.0 / (1u64 << 20) as f64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CueConfig {
    pub color_clusters: usize,
    pub textons: usize,
    pub w_edge: f64,
    pub w_grad: f64,
    /// Lab distance scale of the regularized color gradient.
    pub tau: f64,
}

impl Default for CueConfig {
    fn default() -> Self {
        Self {
            color_clusters: 32,
            textons: 32,
            w_edge: 1.0,
            w_grad: 1.0,
            tau: 10.0,
        }
    }
}

/// sRGB (D65) to CIE L*a*b*.
pub fn srgb_to_lab(rgb: [u8; 3]) -> [f64; 3] {
    fn linear(c: u8) -> f64 {
        let c = c as f64 / 255.0;
        if c <= 0.04045 {
            c / 12.92
        } else {
            ((c + 0.055) / 1.055).powf(2.4)
        }
    }
    fn f(t: f64) -> f64 {
        const D: f64 = 6.0 / 29.0;
        if t > D * D * D {
            t.cbrt()
        } else {
            t / (3.0 * D * D) + 4.0 / 29.0
        }
    }
    let (r, g, b) = (linear(rgb[0]), linear(rgb[1]), linear(rgb[2]));
    let x = 0.412_456_4 * r + 0.357_576_1 * g + 0.180_437_5 * b;
    let y = 0.212_672_9 * r + 0.715_152_2 * g + 0.072_175_0 * b;
    let z = 0.019_333_9 * r + 0.119_192_0 * g + 0.950_304_1 * b;
    let (fx, fy, fz) = (f(x / 0.950_47), f(y), f(z / 1.088_83));
    [116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)]
}

pub fn lab_image(img: &RasterImage) -> Vec<[f64; 3]> {
    img.pixels().iter().map(|&p| srgb_to_lab(p)).collect()
}

/// PCA-tree clustering of the Lab colors.
pub fn cluster_colors(img: &RasterImage, k: usize) -> ClusterAssignment {
    let lab: Vec<f64> = lab_image(img).into_iter().flatten().collect();
    pca_tree_cluster(&lab, 3, k)
}

/// Texton ids: 8 oriented filter responses per pixel, clustered by the same
/// PCA tree as the colors.
pub fn compute_textons(img: &RasterImage, k: usize) -> ClusterAssignment {
    let responses = filter_responses(img);
    pca_tree_cluster(&responses, FILTER_COUNT, k)
}

/// Regularity weight of one 4-adjacent pixel pair, kept decomposed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeWeight {
    pub contour: f64,
    pub color: f64,
}

impl EdgeWeight {
    pub fn total(&self) -> f64 {
        self.contour + self.color
    }
}

/// Regularity weights of every 4-adjacent pixel pair.
///
/// Horizontal pairs `(x, y)-(x+1, y)` are indexed `y * (w - 1) + x`;
/// vertical pairs `(x, y)-(x, y+1)` are indexed `y * w + x`.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeWeightField {
    width: usize,
    height: usize,
    horizontal: Vec<EdgeWeight>,
    vertical: Vec<EdgeWeight>,
}

impl EdgeWeightField {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn horizontal(&self, x: usize, y: usize) -> EdgeWeight {
        self.horizontal[y * (self.width - 1) + x]
    }

    pub fn vertical(&self, x: usize, y: usize) -> EdgeWeight {
        self.vertical[y * self.width + x]
    }

    /// Weight between two 4-adjacent pixel indices, in either order.
    pub fn between(&self, p: usize, q: usize) -> f64 {
        let (a, b) = (p.min(q), p.max(q));
        let (x, y) = (a % self.width, a / self.width);
        if b == a + 1 && x + 1 < self.width {
            self.horizontal(x, y).total()
        } else if b == a + self.width {
            self.vertical(x, y).total()
        } else {
            panic!("pixels {p} and {q} are not 4-adjacent")
        }
    }

    /// Uniform zero field, as produced by a flat image without contours.
    pub fn zeros(width: usize, height: usize) -> Self {
        let zero = EdgeWeight {
            contour: 0.0,
            color: 0.0,
        };
        Self {
            width,
            height,
            horizontal: vec![zero; width.saturating_sub(1) * height],
            vertical: vec![zero; width * height.saturating_sub(1)],
        }
    }
}

/// `r(p,q) = w_edge * max(con(p), con(q)) + w_grad * (1 - exp(-|Lab(p) - Lab(q)| / tau))`.
pub fn regularity_field(
    img: &RasterImage,
    con: &ContourMap,
    w_edge: f64,
    w_grad: f64,
    tau: f64,
) -> Result<EdgeWeightField, CueError> {
    let (w, h) = (img.width(), img.height());
    if (con.width(), con.height()) != (w, h) {
        return Err(CueError::DimensionMismatch {
            image: (w, h),
            other: (con.width(), con.height()),
        });
    }
    if !(w_edge >= 0.0 && w_grad >= 0.0) {
        return Err(CueError::InvalidParameter(
            "regularity weights must be nonnegative".into(),
        ));
    }
    if !(tau > 0.0) {
        return Err(CueError::InvalidParameter("tau must be positive".into()));
    }
    let lab = lab_image(img);
    let weight = |p: usize, q: usize| {
        let c = con.get(p).max(con.get(q)) as f64;
        let d = lab[p]
            .iter()
            .zip(&lab[q])
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        EdgeWeight {
            contour: w_edge * c,
            color: w_grad * (1.0 - (-d / tau).exp()),
        }
    };
    let mut horizontal = Vec::with_capacity((w - 1) * h);
    let mut vertical = Vec::with_capacity(w * (h - 1));
    for y in 0..h {
        for x in 0..w - 1 {
            let p = y * w + x;
            horizontal.push(weight(p, p + 1));
        }
    }
    for y in 0..h - 1 {
        for x in 0..w {
            let p = y * w + x;
            vertical.push(weight(p, p + w));
        }
    }
    Ok(EdgeWeightField {
        width: w,
        height: h,
        horizontal,
        vertical,
    })
}

/// Per-pixel, per-category code lengths `-log2 v` in bits.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticCostField {
    width: usize,
    height: usize,
    categories: usize,
    background: usize,
    costs: Vec<f64>,
}

impl SemanticCostField {
    /// Builds a field from raw pixel-major costs, rounding to
    /// [`COST_QUANTUM`].
    pub fn from_costs(
        width: usize,
        height: usize,
        categories: usize,
        background: usize,
        costs: Vec<f64>,
    ) -> Result<Self, CueError> {
        if costs.len() != width * height * categories || background >= categories {
            return Err(CueError::InvalidParameter(
                "cost vector does not match the declared shape".into(),
            ));
        }
        if costs.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
            return Err(CueError::InvalidParameter(
                "semantic costs must be finite and nonnegative".into(),
            ));
        }
        Ok(Self {
            width,
            height,
            categories,
            background,
            costs: costs.into_iter().map(quantize).collect(),
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn num_categories(&self) -> usize {
        self.categories
    }

    pub fn background(&self) -> usize {
        self.background
    }

    pub fn pixel(&self, index: usize) -> &[f64] {
        &self.costs[index * self.categories..(index + 1) * self.categories]
    }

    /// Lowest-cost category of one pixel, lowest index on ties.
    pub fn best_label(&self, index: usize) -> usize {
        argmin(self.pixel(index))
    }
}

fn quantize(bits: f64) -> f64 {
    (bits / COST_QUANTUM).round() * COST_QUANTUM
}

/// Index of the smallest value, first one on ties.
pub(crate) fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v < values[best] {
            best = i;
        }
    }
    best
}

pub fn semantic_costs(map: &SemanticMap) -> SemanticCostField {
    let costs = map.probs().iter().map(|&v| -(v as f64).log2()).collect();
    SemanticCostField::from_costs(
        map.width(),
        map.height(),
        map.num_categories(),
        map.background(),
        costs,
    )
    .expect("clamped probabilities give finite costs")
}

/// All cue channels for one image.
#[derive(Debug, Clone)]
pub struct Cues {
    pub colors: ClusterAssignment,
    pub textons: ClusterAssignment,
    pub regularity: EdgeWeightField,
    pub semantic: SemanticCostField,
}

impl Cues {
    pub fn compute(
        img: &RasterImage,
        sem: &SemanticMap,
        con: &ContourMap,
        cfg: &CueConfig,
    ) -> Result<Self, CueError> {
        let dims = (img.width(), img.height());
        if (sem.width(), sem.height()) != dims {
            return Err(CueError::DimensionMismatch {
                image: dims,
                other: (sem.width(), sem.height()),
            });
        }
        Ok(Self {
            colors: cluster_colors(img, cfg.color_clusters.max(1)),
            textons: compute_textons(img, cfg.textons.max(1)),
            regularity: regularity_field(img, con, cfg.w_edge, cfg.w_grad, cfg.tau)?,
            semantic: semantic_costs(sem),
        })
    }
}
