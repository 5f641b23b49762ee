//! Region and boundary benchmark scores, and their aggregation over
//! threshold sweeps.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hierarchy::SemanticSegmentation;
use crate::raster::LabelMap;

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("no ground truth given")]
    EmptyGtSet,
    #[error("sweep rows do not share the threshold grid: {0}")]
    RaggedSweep(String),
    #[error("category {0} is outside the category list")]
    CategoryOutOfRange(u32),
    #[error("tolerance must be finite and nonnegative")]
    InvalidTolerance,
}

fn check_dims(a: (usize, usize), b: (usize, usize)) -> Result<(), MetricError> {
    if a == b {
        Ok(())
    } else {
        Err(MetricError::DimensionMismatch(format!(
            "{}x{} vs {}x{}",
            a.0, a.1, b.0, b.1
        )))
    }
}

/// Overlap counts between a machine partition (rows) and a ground truth
/// (columns).
#[derive(Debug, Clone, PartialEq)]
pub struct ContingencyTable {
    pub cells: BTreeMap<(u32, u32), u64>,
    pub rows: BTreeMap<u32, u64>,
    pub cols: BTreeMap<u32, u64>,
    pub total: u64,
}

impl ContingencyTable {
    pub fn new(s: &LabelMap, gt: &LabelMap) -> Result<Self, MetricError> {
        check_dims((s.width(), s.height()), (gt.width(), gt.height()))?;
        let mut cells = BTreeMap::new();
        let mut rows = BTreeMap::new();
        let mut cols = BTreeMap::new();
        for (&i, &j) in s.labels().iter().zip(gt.labels()) {
            *cells.entry((i, j)).or_insert(0) += 1;
            *rows.entry(i).or_insert(0) += 1;
            *cols.entry(j).or_insert(0) += 1;
        }
        Ok(Self {
            cells,
            rows,
            cols,
            total: s.labels().len() as u64,
        })
    }
}

/// Size-weighted best overlap of every ground-truth region with a machine
/// region.
pub fn covering(s: &LabelMap, gt: &LabelMap) -> Result<f64, MetricError> {
    let t = ContingencyTable::new(s, gt)?;
    let mut best: BTreeMap<u32, f64> = BTreeMap::new();
    for (&(i, j), &nij) in &t.cells {
        let union = t.rows[&i] + t.cols[&j] - nij;
        let iou = nij as f64 / union as f64;
        let b = best.entry(j).or_insert(0.0);
        *b = b.max(iou);
    }
    let acc: f64 = t.cols.iter().map(|(j, &size)| size as f64 * best[j]).sum();
    Ok(acc / t.total as f64)
}

fn pairs(n: u64) -> f64 {
    n as f64 * (n as f64 - 1.0) / 2.0
}

/// Fraction of pixel pairs on which both partitions agree.
pub fn rand_index(s: &LabelMap, gt: &LabelMap) -> Result<f64, MetricError> {
    let t = ContingencyTable::new(s, gt)?;
    if t.total < 2 {
        return Ok(1.0);
    }
    let joint: f64 = t.cells.values().map(|&c| pairs(c)).sum();
    let a: f64 = t.rows.values().map(|&c| pairs(c)).sum();
    let b: f64 = t.cols.values().map(|&c| pairs(c)).sum();
    let all = pairs(t.total);
    Ok((all + 2.0 * joint - a - b) / all)
}

/// Probabilistic Rand index: mean Rand index over the annotators.
pub fn pri(s: &LabelMap, gts: &[LabelMap]) -> Result<f64, MetricError> {
    if gts.is_empty() {
        return Err(MetricError::EmptyGtSet);
    }
    let mut acc = 0.0;
    for gt in gts {
        acc += rand_index(s, gt)?;
    }
    Ok(acc / gts.len() as f64)
}

fn entropy_bits<'a>(counts: impl Iterator<Item = &'a u64>, total: u64) -> f64 {
    let n = total as f64;
    counts
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum()
}

/// Variation of information in bits, `2 H(S, G) - H(S) - H(G)`.
pub fn voi(s: &LabelMap, gt: &LabelMap) -> Result<f64, MetricError> {
    let t = ContingencyTable::new(s, gt)?;
    let joint = entropy_bits(t.cells.values(), t.total);
    let hs = entropy_bits(t.rows.values(), t.total);
    let hg = entropy_bits(t.cols.values(), t.total);
    Ok((2.0 * joint - hs - hg).max(0.0))
}

/// Boundary cells of a partition on the doubled `(2w+1) x (2h+1)` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryMap {
    pub width: usize,
    pub height: usize,
    pub cells: Vec<bool>,
}

impl BoundaryMap {
    /// Edge cells between differently labelled pixels, plus interior vertex
    /// cells touching such an edge.
    pub fn from_labels(seg: &LabelMap) -> Self {
        let (w, h) = (seg.width(), seg.height());
        let (gw, gh) = (2 * w + 1, 2 * h + 1);
        let mut cells = vec![false; gw * gh];
        for y in 0..h {
            for x in 0..w {
                if x + 1 < w && seg.get(x, y) != seg.get(x + 1, y) {
                    cells[(2 * y + 1) * gw + 2 * x + 2] = true;
                }
                if y + 1 < h && seg.get(x, y) != seg.get(x, y + 1) {
                    cells[(2 * y + 2) * gw + 2 * x + 1] = true;
                }
            }
        }
        for vy in 1..h {
            for vx in 1..w {
                let (cx, cy) = (2 * vx, 2 * vy);
                cells[cy * gw + cx] = cells[(cy - 1) * gw + cx]
                    || cells[(cy + 1) * gw + cx]
                    || cells[cy * gw + cx - 1]
                    || cells[cy * gw + cx + 1];
            }
        }
        Self {
            width: gw,
            height: gh,
            cells,
        }
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    fn points(&self) -> Vec<(i64, i64)> {
        self.cells
            .iter()
            .enumerate()
            .filter(|(_, &c)| c)
            .map(|(i, _)| ((i % self.width) as i64, (i / self.width) as i64))
            .collect()
    }
}

/// Benchmark default matching radius: 0.75% of the image diagonal.
pub fn default_tolerance(width: usize, height: usize) -> f64 {
    0.0075 * ((width * width + height * height) as f64).sqrt()
}

/// Greedy one-to-one matching in ascending distance, ties by index. Points
/// are doubled-grid cells; `tol` is in pixels. Returns the number of pairs.
fn greedy_matches(machine: &[(i64, i64)], truth: &[(i64, i64)], tol: f64) -> usize {
    // Doubled-grid units: one pixel is two cells.
    let reach = 2.0 * tol;
    let r = reach.floor() as i64;
    let limit = reach * reach;
    let index: BTreeMap<(i64, i64), usize> =
        truth.iter().enumerate().map(|(k, &p)| (p, k)).collect();
    let mut candidates: Vec<(i64, usize, usize)> = Vec::new();
    for (m, &(mx, my)) in machine.iter().enumerate() {
        for dy in -r..=r {
            for dx in -r..=r {
                let d2 = dx * dx + dy * dy;
                if d2 as f64 > limit {
                    continue;
                }
                if let Some(&g) = index.get(&(mx + dx, my + dy)) {
                    candidates.push((d2, m, g));
                }
            }
        }
    }
    candidates.sort_unstable();
    let mut used_m = vec![false; machine.len()];
    let mut used_g = vec![false; truth.len()];
    let mut matched = 0;
    for (_, m, g) in candidates {
        if !used_m[m] && !used_g[g] {
            used_m[m] = true;
            used_g[g] = true;
            matched += 1;
        }
    }
    matched
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundaryScore {
    pub precision: f64,
    pub recall: f64,
    pub f: f64,
}

/// Boundary precision, recall and F against one or more annotators.
///
/// Precision matches machine cells against the union of all annotators;
/// recall is computed per annotator and averaged. An empty machine boundary
/// has precision 1; an empty annotator boundary has recall 1.
pub fn boundary_f(
    machine: &BoundaryMap,
    truths: &[BoundaryMap],
    tol: f64,
) -> Result<BoundaryScore, MetricError> {
    if truths.is_empty() {
        return Err(MetricError::EmptyGtSet);
    }
    if !(tol >= 0.0 && tol.is_finite()) {
        return Err(MetricError::InvalidTolerance);
    }
    for t in truths {
        check_dims((machine.width, machine.height), (t.width, t.height))?;
    }
    let m = machine.points();
    let mut union = vec![false; machine.cells.len()];
    for t in truths {
        for (u, &c) in union.iter_mut().zip(&t.cells) {
            *u |= c;
        }
    }
    let union = BoundaryMap {
        width: machine.width,
        height: machine.height,
        cells: union,
    };
    let precision = if m.is_empty() {
        1.0
    } else {
        greedy_matches(&m, &union.points(), tol) as f64 / m.len() as f64
    };
    let recall = truths
        .iter()
        .map(|t| {
            let g = t.points();
            if g.is_empty() {
                1.0
            } else {
                greedy_matches(&m, &g, tol) as f64 / g.len() as f64
            }
        })
        .sum::<f64>()
        / truths.len() as f64;
    let f = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(BoundaryScore {
        precision,
        recall,
        f,
    })
}

/// Mean intersection over union, as a percentage, over the categories that
/// occur in either map.
pub fn mean_iou(
    pred: &SemanticSegmentation,
    gt: &SemanticSegmentation,
    categories: usize,
) -> Result<f64, MetricError> {
    check_dims((pred.width, pred.height), (gt.width, gt.height))?;
    let mut inter = vec![0u64; categories];
    let mut union = vec![0u64; categories];
    for (&p, &g) in pred.categories.iter().zip(&gt.categories) {
        for c in [p, g] {
            if c as usize >= categories {
                return Err(MetricError::CategoryOutOfRange(c));
            }
        }
        if p == g {
            inter[p as usize] += 1;
            union[p as usize] += 1;
        } else {
            union[p as usize] += 1;
            union[g as usize] += 1;
        }
    }
    let present: Vec<f64> = inter
        .iter()
        .zip(&union)
        .filter(|(_, &u)| u > 0)
        .map(|(&i, &u)| i as f64 / u as f64)
        .collect();
    if present.is_empty() {
        return Ok(100.0);
    }
    Ok(100.0 * present.iter().sum::<f64>() / present.len() as f64)
}

/// Score direction of a metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Better {
    Higher,
    Lower,
}

impl Better {
    fn improves(self, candidate: f64, incumbent: f64) -> bool {
        match self {
            Better::Higher => candidate > incumbent,
            Better::Lower => candidate < incumbent,
        }
    }
}

/// Region or boundary metric usable as a sweep objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Covering,
    Pri,
    Voi,
    BoundaryF,
}

impl Metric {
    pub fn better(self) -> Better {
        match self {
            Metric::Voi => Better::Lower,
            _ => Better::Higher,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Metric::Covering => "covering",
            Metric::Pri => "pri",
            Metric::Voi => "voi",
            Metric::BoundaryF => "boundary_f",
        }
    }

    pub const ALL: [Metric; 4] = [
        Metric::Covering,
        Metric::Pri,
        Metric::Voi,
        Metric::BoundaryF,
    ];
}

impl std::str::FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name() == s || (s == "f" && *m == Metric::BoundaryF))
            .ok_or_else(|| format!("unknown metric {s:?}"))
    }
}

/// All four partition scores against a set of annotators. Covering and VOI
/// are averaged over annotators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PartitionScores {
    pub covering: f64,
    pub pri: f64,
    pub voi: f64,
    pub boundary: BoundaryScore,
}

impl PartitionScores {
    pub fn get(&self, metric: Metric) -> f64 {
        match metric {
            Metric::Covering => self.covering,
            Metric::Pri => self.pri,
            Metric::Voi => self.voi,
            Metric::BoundaryF => self.boundary.f,
        }
    }
}

/// Scores one partition. `tol` defaults to [`default_tolerance`].
pub fn score_partition(
    seg: &LabelMap,
    gts: &[LabelMap],
    tol: Option<f64>,
) -> Result<PartitionScores, MetricError> {
    if gts.is_empty() {
        return Err(MetricError::EmptyGtSet);
    }
    let k = gts.len() as f64;
    let mut cov = 0.0;
    let mut var = 0.0;
    for gt in gts {
        cov += covering(seg, gt)?;
        var += voi(seg, gt)?;
    }
    let truths: Vec<BoundaryMap> = gts.iter().map(BoundaryMap::from_labels).collect();
    let tol = tol.unwrap_or_else(|| default_tolerance(seg.width(), seg.height()));
    Ok(PartitionScores {
        covering: cov / k,
        pri: pri(seg, gts)?,
        voi: var / k,
        boundary: boundary_f(&BoundaryMap::from_labels(seg), &truths, tol)?,
    })
}

/// Scores of several images over one shared threshold grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSweep {
    pub thresholds: Vec<f64>,
    /// One row per image, one column per threshold.
    pub scores: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OdsOis {
    pub ods: f64,
    pub ods_threshold: f64,
    pub ois: f64,
}

impl ScoreSweep {
    /// Best dataset-wide threshold and mean of per-image optima. Ties keep
    /// the lowest threshold.
    pub fn ods_ois(&self, better: Better) -> Result<OdsOis, MetricError> {
        let k = self.thresholds.len();
        if k == 0 || self.scores.is_empty() {
            return Err(MetricError::RaggedSweep("empty sweep".into()));
        }
        if self.thresholds.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(MetricError::RaggedSweep(
                "thresholds are not strictly increasing".into(),
            ));
        }
        if let Some((i, row)) = self.scores.iter().enumerate().find(|(_, r)| r.len() != k) {
            return Err(MetricError::RaggedSweep(format!(
                "image {i} has {} scores for {k} thresholds",
                row.len()
            )));
        }
        let images = self.scores.len() as f64;
        let mut ods = (f64::NAN, 0);
        for c in 0..k {
            let mean = self.scores.iter().map(|r| r[c]).sum::<f64>() / images;
            if c == 0 || better.improves(mean, ods.0) {
                ods = (mean, c);
            }
        }
        let ois = self
            .scores
            .iter()
            .map(|r| {
                r.iter()
                    .copied()
                    .reduce(|a, b| if better.improves(b, a) { b } else { a })
                    .unwrap_or(f64::NAN)
            })
            .sum::<f64>()
            / images;
        Ok(OdsOis {
            ods: ods.0,
            ods_threshold: self.thresholds[ods.1],
            ois,
        })
    }
}
