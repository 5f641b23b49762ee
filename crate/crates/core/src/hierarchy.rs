//! Nested segmentations and ultrametric contour maps from a merge log.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::cues::{argmin, SemanticCostField};
use crate::engine::MergeEvent;
use crate::raster::{FloatRaster, LabelMap};

#[derive(Debug, Error, PartialEq)]
pub enum HierarchyError {
    #[error("merge log has {events} events, {needed} are needed to reach one region")]
    IncompleteHierarchy { events: usize, needed: usize },
    #[error("invalid merge event {t}: {reason}")]
    InvalidEvent { t: usize, reason: String },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

/// Union-find over pixels that remembers when each link was made. Union by
/// rank without path compression keeps paths logarithmic, so the time two
/// pixels first joined is the latest link on the forest path between them.
#[derive(Debug, Clone)]
struct TimedForest {
    parent: Vec<u32>,
    rank: Vec<u8>,
    linked_at: Vec<usize>,
}

impl TimedForest {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n as u32).collect(),
            rank: vec![0; n],
            linked_at: vec![usize::MAX; n],
        }
    }

    fn root(&self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            x = self.parent[x as usize];
        }
        x
    }

    fn union(&mut self, a: u32, b: u32, t: usize) {
        let (mut ra, mut rb) = (self.root(a), self.root(b));
        if ra == rb {
            return;
        }
        if self.rank[ra as usize] < self.rank[rb as usize] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb as usize] = ra;
        self.linked_at[rb as usize] = t;
        if self.rank[ra as usize] == self.rank[rb as usize] {
            self.rank[ra as usize] += 1;
        }
    }

    fn joined_at(&self, p: u32, q: u32) -> Option<usize> {
        // Path from p to its root with the latest link seen so far.
        let mut path = Vec::new();
        let (mut x, mut latest) = (p, 0usize);
        loop {
            path.push((x, latest));
            if self.parent[x as usize] == x {
                break;
            }
            latest = latest.max(self.linked_at[x as usize]);
            x = self.parent[x as usize];
        }
        let (mut y, mut latest_q) = (q, 0usize);
        loop {
            if let Some(&(_, latest_p)) = path.iter().find(|(node, _)| *node == y) {
                return Some(latest_p.max(latest_q));
            }
            if self.parent[y as usize] == y {
                return None;
            }
            latest_q = latest_q.max(self.linked_at[y as usize]);
            y = self.parent[y as usize];
        }
    }
}

/// Merge log over a pixel grid, with the level at which every inter-pixel
/// boundary disappears.
#[derive(Debug, Clone)]
pub struct MergeHierarchy {
    width: usize,
    height: usize,
    events: Vec<MergeEvent>,
    /// Horizontal pairs `y * (w - 1) + x`, then vertical pairs `y * w + x`.
    /// Infinite where the log never joins the two pixels.
    edge_levels: Vec<f64>,
    forest: TimedForest,
}

impl MergeHierarchy {
    pub fn new(width: usize, height: usize, events: &[MergeEvent]) -> Result<Self, HierarchyError> {
        let n = width * height;
        if n == 0 {
            return Err(HierarchyError::DimensionMismatch("empty grid".into()));
        }
        // Representative pixel of every live hierarchy node.
        let mut rep: Vec<Option<u32>> = (0..n as u32).map(Some).collect();
        let mut forest = TimedForest::new(n);
        let mut prev = 0.0f64;
        for (t, e) in events.iter().enumerate() {
            let bad = |reason: &str| HierarchyError::InvalidEvent {
                t,
                reason: reason.to_string(),
            };
            if e.t != t || e.new as usize != n + t {
                return Err(bad("ordinal and node id out of sequence"));
            }
            if e.lambda_star < prev || e.lambda_star.is_nan() {
                return Err(bad("lambda_star decreases"));
            }
            prev = e.lambda_star;
            let take = |rep: &mut Vec<Option<u32>>, node: u32| {
                rep.get_mut(node as usize).and_then(Option::take)
            };
            let (Some(pa), Some(pb)) = (take(&mut rep, e.a), take(&mut rep, e.b)) else {
                return Err(bad("merges a node that is not live"));
            };
            forest.union(pa, pb, t);
            rep.push(Some(pa));
        }
        let level = |p: usize, q: usize| {
            forest
                .joined_at(p as u32, q as u32)
                .map_or(f64::INFINITY, |t| events[t].lambda_star)
        };
        let mut edge_levels = Vec::with_capacity(2 * n);
        for y in 0..height {
            for x in 0..width.saturating_sub(1) {
                let p = y * width + x;
                edge_levels.push(level(p, p + 1));
            }
        }
        for y in 0..height.saturating_sub(1) {
            for x in 0..width {
                let p = y * width + x;
                edge_levels.push(level(p, p + width));
            }
        }
        Ok(Self {
            width,
            height,
            events: events.to_vec(),
            edge_levels,
            forest,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn events(&self) -> &[MergeEvent] {
        &self.events
    }

    /// True when the log reaches a single region.
    pub fn is_complete(&self) -> bool {
        self.events.len() + 1 == self.width * self.height
    }

    /// Level at which the boundary between two 4-adjacent pixels disappears.
    pub fn edge_level(&self, p: usize, q: usize) -> f64 {
        let (a, b) = (p.min(q), p.max(q));
        let w = self.width;
        let (x, y) = (a % w, a / w);
        if b == a + 1 && x + 1 < w {
            self.edge_levels[y * (w - 1) + x]
        } else if b == a + w {
            self.edge_levels[(w - 1) * self.height + a]
        } else {
            panic!("pixels {p} and {q} are not 4-adjacent")
        }
    }

    /// Level at which two arbitrary pixels first share a region; infinite if
    /// they never do.
    pub fn merge_level(&self, p: usize, q: usize) -> f64 {
        if p == q {
            return 0.0;
        }
        self.forest
            .joined_at(p as u32, q as u32)
            .map_or(f64::INFINITY, |t| self.events[t].lambda_star)
    }

    /// Boundary strengths on the doubled `(2w+1) x (2h+1)` grid. Pixel cells
    /// sit at odd coordinates and hold 0, edge cells hold the disappearance
    /// level of their boundary, interior vertex cells the maximum of their
    /// four edges. The outer frame is 0.
    pub fn build_ucm(&self) -> Result<FloatRaster, HierarchyError> {
        let needed = self.width * self.height - 1;
        if self.events.len() < needed {
            return Err(HierarchyError::IncompleteHierarchy {
                events: self.events.len(),
                needed,
            });
        }
        let (w, h) = (self.width, self.height);
        let (gw, gh) = (2 * w + 1, 2 * h + 1);
        let mut values = vec![0.0f32; gw * gh];
        for y in 0..h {
            for x in 0..w {
                let p = y * w + x;
                if x + 1 < w {
                    values[(2 * y + 1) * gw + 2 * x + 2] = self.edge_level(p, p + 1) as f32;
                }
                if y + 1 < h {
                    values[(2 * y + 2) * gw + 2 * x + 1] = self.edge_level(p, p + w) as f32;
                }
            }
        }
        for vy in 1..h {
            for vx in 1..w {
                let (cx, cy) = (2 * vx, 2 * vy);
                let m = [
                    values[(cy - 1) * gw + cx],
                    values[(cy + 1) * gw + cx],
                    values[cy * gw + cx - 1],
                    values[cy * gw + cx + 1],
                ]
                .into_iter()
                .fold(0.0f32, f32::max);
                values[cy * gw + cx] = m;
            }
        }
        Ok(FloatRaster {
            width: gw,
            height: gh,
            values,
        })
    }

    /// Partition left after removing every boundary whose level is strictly
    /// below `lambda`. Ids follow raster order of each region's first pixel.
    pub fn threshold(&self, lambda: f64) -> LabelMap {
        let (w, h) = (self.width, self.height);
        let mut out = vec![u32::MAX; w * h];
        let mut next = 0u32;
        let mut stack = Vec::new();
        for start in 0..w * h {
            if out[start] != u32::MAX {
                continue;
            }
            out[start] = next;
            stack.push(start);
            while let Some(p) = stack.pop() {
                let (x, y) = (p % w, p / w);
                let mut neighbors = [None; 4];
                if x > 0 {
                    neighbors[0] = Some(p - 1);
                }
                if x + 1 < w {
                    neighbors[1] = Some(p + 1);
                }
                if y > 0 {
                    neighbors[2] = Some(p - w);
                }
                if y + 1 < h {
                    neighbors[3] = Some(p + w);
                }
                for q in neighbors.into_iter().flatten() {
                    if out[q] == u32::MAX && self.edge_level(p, q) < lambda {
                        out[q] = next;
                        stack.push(q);
                    }
                }
            }
            next += 1;
        }
        LabelMap::new(w, h, out).expect("grid sized labels")
    }

    pub fn sweep(&self, levels: &[f64]) -> Vec<LabelMap> {
        levels.iter().map(|&l| self.threshold(l)).collect()
    }

    /// Monotone levels of the log, in event order.
    pub fn levels(&self) -> Vec<f64> {
        self.events.iter().map(|e| e.lambda_star).collect()
    }
}

/// `count` evenly spaced quantiles of `values` (nearest rank), ascending and
/// without repeats. Quantile `i` sits at `i / (count + 1)`.
pub fn quantile_levels(values: &[f64], count: usize) -> Vec<f64> {
    let mut sorted: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    if sorted.is_empty() || count == 0 {
        return Vec::new();
    }
    sorted.sort_by(f64::total_cmp);
    let last = (sorted.len() - 1) as f64;
    let mut out: Vec<f64> = (1..=count)
        .map(|i| {
            let q = i as f64 / (count + 1) as f64;
            sorted[(q * last).round() as usize]
        })
        .collect();
    out.dedup();
    out
}

/// Per-pixel categories obtained by labelling each region as a whole.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SemanticSegmentation {
    pub width: usize,
    pub height: usize,
    /// Category index of every pixel.
    pub categories: Vec<u32>,
    /// Category chosen for every region id of the source partition.
    pub regions: BTreeMap<u32, usize>,
}

impl SemanticSegmentation {
    /// Category indices as a label map, for writing.
    pub fn to_label_map(&self) -> LabelMap {
        LabelMap::new(self.width, self.height, self.categories.clone()).expect("grid sized")
    }

    /// Pixel categories without region provenance, e.g. a ground truth.
    pub fn from_categories(map: &LabelMap) -> Self {
        Self {
            width: map.width(),
            height: map.height(),
            categories: map.labels().to_vec(),
            regions: BTreeMap::new(),
        }
    }
}

/// Labels every region of `seg` with the category of least summed cost,
/// lowest index on ties.
pub fn extract_semantic(
    seg: &LabelMap,
    costs: &SemanticCostField,
) -> Result<SemanticSegmentation, HierarchyError> {
    if (seg.width(), seg.height()) != (costs.width(), costs.height()) {
        return Err(HierarchyError::DimensionMismatch(format!(
            "label map is {}x{}, semantic costs {}x{}",
            seg.width(),
            seg.height(),
            costs.width(),
            costs.height()
        )));
    }
    let n_cat = costs.num_categories();
    let mut sums: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
    for (p, &r) in seg.labels().iter().enumerate() {
        let acc = sums.entry(r).or_insert_with(|| vec![0.0; n_cat]);
        for (a, c) in acc.iter_mut().zip(costs.pixel(p)) {
            *a += c;
        }
    }
    let regions: BTreeMap<u32, usize> = sums.iter().map(|(&r, s)| (r, argmin(s))).collect();
    let categories = seg.labels().iter().map(|r| regions[r] as u32).collect();
    Ok(SemanticSegmentation {
        width: seg.width(),
        height: seg.height(),
        categories,
        regions,
    })
}
