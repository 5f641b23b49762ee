//! Greedy bottom-up merging by minimum unit merging cost.
//!
//! Every pixel starts as its own region. The engine repeatedly merges the
//! adjacent pair whose complexity decrease per unit tracing load is
//! smallest, keeping per-region cue statistics, the category-wise groups and
//! the boundary tracing loads up to date, and logs every merge.

mod config;
pub mod cost;
pub mod table;

pub use config::{EngineConfig, EtaPrior};
pub use cost::{code_length, d_background, soft_switch, unit_merging_cost, Deltas};
pub use table::{Check, DirectAccessTable, Entry};

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cues::{argmin, ClusterAssignment, Cues, EdgeWeightField, SemanticCostField};
use crate::raster::LabelMap;

#[derive(Debug, Error, PartialEq)]
pub enum EngineError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid engine configuration: {0}")]
    InvalidConfig(String),
    #[error("regions {0} and {1} are not adjacent")]
    NotAdjacent(u32, u32),
    #[error("region {0} has been merged away")]
    DeadRegion(u32),
    #[error("no candidate merges left")]
    EmptyTable,
    #[error("only one region remains")]
    Exhausted,
}

/// Handle of a live region. Handles are reused: the larger side of a merge
/// keeps its handle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RegionId(pub u32);

/// One logged merge. Region ids here are hierarchy node ids: pixels are
/// `0..n`, the region created by event `t` is `n + t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MergeEvent {
    pub t: usize,
    pub a: u32,
    pub b: u32,
    pub new: u32,
    pub lambda_raw: f64,
    pub lambda_star: f64,
    pub label: usize,
}

/// Cost breakdown of one candidate merge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Evaluation {
    pub deltas: Deltas,
    pub sigma: f64,
    pub load: f64,
    pub lambda: f64,
}

#[derive(Debug, Clone)]
struct Region {
    alive: bool,
    node: u32,
    version: u32,
    size: u32,
    pixels: Vec<u32>,
    color_hist: Vec<u32>,
    texture_hist: Vec<u32>,
    color_bits: f64,
    texture_bits: f64,
    sem: Vec<f64>,
    label: usize,
    internal_regularity: f64,
    neighbors: BTreeMap<u32, u32>,
}

#[derive(Debug, Clone)]
struct Segment {
    alive: bool,
    a: u32,
    b: u32,
    edges: u32,
    corners: u32,
    regularity: f64,
    mid_sum: (f64, f64),
    stamp: u32,
    versions: (u32, u32),
}

/// Output of a full run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub labels: LabelMap,
    /// For each category, the ids (in `labels`) of regions whose best label
    /// it is.
    pub groups: Vec<Vec<u32>>,
    pub events: Vec<MergeEvent>,
}

#[derive(Debug, Clone)]
pub struct MergeState {
    width: usize,
    height: usize,
    cfg: EngineConfig,
    background: usize,
    owner: Vec<u32>,
    regions: Vec<Region>,
    segments: Vec<Segment>,
    table: DirectAccessTable,
    groups: Vec<BTreeSet<u32>>,
    events: Vec<MergeEvent>,
    live: usize,
    lambda_star: f64,
    violations: usize,
    semantic: SemanticCostField,
    regularity: EdgeWeightField,
    color_ids: Vec<u32>,
    texture_ids: Vec<u32>,
}

fn ordered(a: u32, b: u32) -> (u32, u32) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

impl MergeState {
    pub fn new(cues: &Cues, cfg: EngineConfig) -> Result<Self, EngineError> {
        Self::from_parts(
            &cues.colors,
            &cues.textons,
            &cues.regularity,
            &cues.semantic,
            cfg,
        )
    }

    /// One region per pixel, labelled by its cheapest category, with a
    /// tabled cost for every 4-adjacent pixel pair.
    pub fn from_parts(
        colors: &ClusterAssignment,
        textons: &ClusterAssignment,
        regularity: &EdgeWeightField,
        semantic: &SemanticCostField,
        cfg: EngineConfig,
    ) -> Result<Self, EngineError> {
        cfg.validate()?;
        let (w, h) = (semantic.width(), semantic.height());
        let n = w * h;
        if colors.ids.len() != n || textons.ids.len() != n {
            return Err(EngineError::DimensionMismatch(format!(
                "cluster maps cover {} and {} pixels, semantic map {n}",
                colors.ids.len(),
                textons.ids.len()
            )));
        }
        if (regularity.width(), regularity.height()) != (w, h) {
            return Err(EngineError::DimensionMismatch(format!(
                "regularity field is {}x{}, semantic map {w}x{h}",
                regularity.width(),
                regularity.height()
            )));
        }
        if colors.ids.iter().any(|&c| c as usize >= colors.k)
            || textons.ids.iter().any(|&c| c as usize >= textons.k)
        {
            return Err(EngineError::DimensionMismatch(
                "cluster id exceeds cluster count".into(),
            ));
        }
        let n_cat = semantic.num_categories();
        let mut groups = vec![BTreeSet::new(); n_cat];
        let regions: Vec<Region> = (0..n)
            .map(|p| {
                let mut color_hist = vec![0; colors.k];
                color_hist[colors.ids[p] as usize] = 1;
                let mut texture_hist = vec![0; textons.k];
                texture_hist[textons.ids[p] as usize] = 1;
                let sem = semantic.pixel(p).to_vec();
                let label = argmin(&sem);
                groups[label].insert(p as u32);
                Region {
                    alive: true,
                    node: p as u32,
                    version: 0,
                    size: 1,
                    pixels: vec![p as u32],
                    color_hist,
                    texture_hist,
                    color_bits: 0.0,
                    texture_bits: 0.0,
                    sem,
                    label,
                    internal_regularity: 0.0,
                    neighbors: BTreeMap::new(),
                }
            })
            .collect();
        let mut state = MergeState {
            width: w,
            height: h,
            cfg,
            background: semantic.background(),
            owner: (0..n as u32).collect(),
            regions,
            segments: Vec::new(),
            table: DirectAccessTable::new(cfg.bucket_width),
            groups,
            events: Vec::new(),
            live: n,
            lambda_star: 0.0,
            violations: 0,
            semantic: semantic.clone(),
            regularity: regularity.clone(),
            color_ids: colors.ids.clone(),
            texture_ids: textons.ids.clone(),
        };
        for y in 0..h {
            for x in 0..w {
                let p = (y * w + x) as u32;
                if x + 1 < w {
                    let r = regularity.horizontal(x, y).total();
                    state.add_segment(p, p + 1, r, (x as f64 + 1.0, y as f64 + 0.5));
                }
                if y + 1 < h {
                    let r = regularity.vertical(x, y).total();
                    state.add_segment(p, p + w as u32, r, (x as f64 + 0.5, y as f64 + 1.0));
                }
            }
        }
        let mut tally = BTreeMap::new();
        for vy in 1..h {
            for vx in 1..w {
                state.vertex_contributions(vx, vy, None, 1, &mut tally);
            }
        }
        for ((a, b), count) in tally {
            let s = state.regions[a as usize].neighbors[&b];
            state.segments[s as usize].corners = count as u32;
        }
        for s in 0..state.segments.len() as u32 {
            state.table_segment(s);
        }
        Ok(state)
    }

    fn add_segment(&mut self, p: u32, q: u32, regularity: f64, mid: (f64, f64)) {
        let s = self.segments.len() as u32;
        self.segments.push(Segment {
            alive: true,
            a: p,
            b: q,
            edges: 1,
            corners: 0,
            regularity,
            mid_sum: mid,
            stamp: 0,
            versions: (0, 0),
        });
        self.regions[p as usize].neighbors.insert(q, s);
        self.regions[q as usize].neighbors.insert(p, s);
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn config(&self) -> &EngineConfig {
        &self.cfg
    }

    /// Number of live regions.
    pub fn region_count(&self) -> usize {
        self.live
    }

    pub fn events(&self) -> &[MergeEvent] {
        &self.events
    }

    /// Events whose raw cost fell below the running monotone level.
    pub fn monotonicity_violations(&self) -> usize {
        self.violations
    }

    pub fn region_of_pixel(&self, p: usize) -> RegionId {
        RegionId(self.owner[p])
    }

    pub fn region_size(&self, r: RegionId) -> Result<u32, EngineError> {
        Ok(self.live_region(r)?.size)
    }

    pub fn region_label(&self, r: RegionId) -> Result<usize, EngineError> {
        Ok(self.live_region(r)?.label)
    }

    /// Per-category semantic code lengths of a region.
    pub fn region_semantic(&self, r: RegionId) -> Result<&[f64], EngineError> {
        Ok(&self.live_region(r)?.sem)
    }

    /// Live neighbors of a region, ascending.
    pub fn neighbors(&self, r: RegionId) -> Result<Vec<RegionId>, EngineError> {
        Ok(self
            .live_region(r)?
            .neighbors
            .keys()
            .map(|&k| RegionId(k))
            .collect())
    }

    /// Category-wise groups as region handles.
    pub fn group(&self, label: usize) -> Vec<RegionId> {
        self.groups[label].iter().map(|&r| RegionId(r)).collect()
    }

    /// Tracing load of the boundary between two adjacent regions.
    pub fn tracing_load(&self, a: RegionId, b: RegionId) -> Result<f64, EngineError> {
        let s = &self.segments[self.segment_between(a, b)? as usize];
        Ok(self.load_of(s))
    }

    /// Shared pixel edges and junction corners of a boundary.
    pub fn boundary_shape(&self, a: RegionId, b: RegionId) -> Result<(u32, u32), EngineError> {
        let s = &self.segments[self.segment_between(a, b)? as usize];
        Ok((s.edges, s.corners))
    }

    fn live_region(&self, r: RegionId) -> Result<&Region, EngineError> {
        match self.regions.get(r.0 as usize) {
            Some(reg) if reg.alive => Ok(reg),
            _ => Err(EngineError::DeadRegion(r.0)),
        }
    }

    fn segment_between(&self, a: RegionId, b: RegionId) -> Result<u32, EngineError> {
        self.live_region(a)?;
        self.live_region(b)?;
        self.regions[a.0 as usize]
            .neighbors
            .get(&b.0)
            .copied()
            .ok_or(EngineError::NotAdjacent(a.0, b.0))
    }

    fn load_of(&self, s: &Segment) -> f64 {
        self.cfg.trace_a * s.edges as f64 + self.cfg.trace_b * s.corners as f64
    }

    /// Complexity decreases for merging two adjacent live regions.
    pub fn delta_components(&self, a: RegionId, b: RegionId) -> Result<Deltas, EngineError> {
        let s = self.segment_between(a, b)?;
        Ok(self.evaluate(&self.segments[s as usize]).deltas)
    }

    /// Full cost breakdown for merging two adjacent live regions.
    pub fn evaluate_pair(&self, a: RegionId, b: RegionId) -> Result<Evaluation, EngineError> {
        let s = self.segment_between(a, b)?;
        Ok(self.evaluate(&self.segments[s as usize]))
    }

    fn evaluate(&self, s: &Segment) -> Evaluation {
        let ri = &self.regions[s.a as usize];
        let rj = &self.regions[s.b as usize];
        let union_bits = |x: &[u32], y: &[u32]| code_length(x.iter().zip(y).map(|(p, q)| p + q));
        let color = union_bits(&ri.color_hist, &rj.color_hist) - ri.color_bits - rj.color_bits;
        let texture =
            union_bits(&ri.texture_hist, &rj.texture_hist) - ri.texture_bits - rj.texture_bits;
        let joint = ri
            .sem
            .iter()
            .zip(&rj.sem)
            .map(|(p, q)| p + q)
            .fold(f64::INFINITY, f64::min);
        let semantic = joint - ri.sem[ri.label] - rj.sem[rj.label];
        let edges = s.edges as f64;
        let eta = self.cfg.eta_prior.eval(
            (s.mid_sum.0 / edges, s.mid_sum.1 / edges),
            self.width,
            self.height,
        );
        let background = d_background(
            (ri.label, rj.label),
            (ri.size, rj.size),
            self.background,
            eta,
            self.cfg.delta_gamma,
        );
        let deltas = Deltas {
            color,
            texture,
            semantic,
            regularity: s.regularity,
            background,
        };
        let load = self.load_of(s);
        let sigma = soft_switch(s.regularity, load, self.cfg.alpha, self.cfg.beta);
        let lambda = unit_merging_cost(&deltas, sigma, load, &self.cfg);
        Evaluation {
            deltas,
            sigma,
            load,
            lambda,
        }
    }

    fn table_segment(&mut self, s: u32) {
        let lambda = self.evaluate(&self.segments[s as usize]).lambda;
        let seg = &mut self.segments[s as usize];
        seg.stamp += 1;
        seg.versions = (
            self.regions[seg.a as usize].version,
            self.regions[seg.b as usize].version,
        );
        let stamp = seg.stamp;
        self.table.insert(s, stamp, lambda);
    }

    /// Drops dead or superseded records and re-tables stale ones until the
    /// head of the table is fresh.
    fn fresh_min(&mut self) -> Option<Entry> {
        loop {
            let head = self.table.front()?;
            let seg = &self.segments[head.handle as usize];
            if !seg.alive || seg.stamp != head.stamp {
                self.table.remove_front();
                continue;
            }
            let current = (
                self.regions[seg.a as usize].version,
                self.regions[seg.b as usize].version,
            );
            if seg.versions != current {
                self.table.remove_front();
                self.table_segment(head.handle);
                continue;
            }
            return Some(head);
        }
    }

    /// Cost of the next merge the engine would perform.
    pub fn peek_lambda(&mut self) -> Option<f64> {
        self.fresh_min().map(|e| e.lambda)
    }

    /// Regions around lattice vertex `(vx, vy)` in TL, TR, BL, BR order.
    fn vertex_pixels(&self, vx: usize, vy: usize) -> [usize; 4] {
        let w = self.width;
        let tl = (vy - 1) * w + vx - 1;
        [tl, tl + 1, tl + w, tl + w + 1]
    }

    /// Adds `sign` to `tally[pair]` for every region pair that has a boundary
    /// edge ending at interior vertex `(vx, vy)`, if at least three regions
    /// meet there. `rename` maps one region onto another in the recorded
    /// pairs only; pairs that collapse onto one region are skipped.
    fn vertex_contributions(
        &self,
        vx: usize,
        vy: usize,
        rename: Option<(u32, u32)>,
        sign: i64,
        tally: &mut BTreeMap<(u32, u32), i64>,
    ) {
        let r = self.vertex_pixels(vx, vy).map(|p| self.owner[p]);
        let distinct = (1..4).filter(|&i| !r[..i].contains(&r[i])).count() + 1;
        if distinct < 3 {
            return;
        }
        let key = |o: u32| match rename {
            Some((from, to)) if o == from => to,
            _ => o,
        };
        let mut pairs: Vec<(u32, u32)> = [(0, 1), (2, 3), (0, 2), (1, 3)]
            .iter()
            .filter(|&&(i, j)| r[i] != r[j])
            .map(|&(i, j)| ordered(r[i], r[j]))
            .collect();
        pairs.sort_unstable();
        pairs.dedup();
        for (a, b) in pairs {
            let (a, b) = (key(a), key(b));
            if a != b {
                *tally.entry(ordered(a, b)).or_insert(0) += sign;
            }
        }
    }

    /// Merges the cheapest fresh pair regardless of the stop threshold.
    pub fn merge_step(&mut self) -> Result<MergeEvent, EngineError> {
        if self.live < 2 {
            return Err(EngineError::Exhausted);
        }
        let head = self.fresh_min().ok_or(EngineError::EmptyTable)?;
        self.table.remove_front();
        Ok(self.merge_segment(head.handle, head.lambda))
    }

    /// Merges a specific adjacent pair at its current cost, bypassing the
    /// greedy order.
    pub fn merge_regions(&mut self, a: RegionId, b: RegionId) -> Result<MergeEvent, EngineError> {
        let s = self.segment_between(a, b)?;
        let lambda = self.evaluate(&self.segments[s as usize]).lambda;
        Ok(self.merge_segment(s, lambda))
    }

    fn merge_segment(&mut self, s: u32, lambda: f64) -> MergeEvent {
        let (sa, sb) = (self.segments[s as usize].a, self.segments[s as usize].b);
        let (keep, gone) = {
            let (za, zb) = (
                self.regions[sa as usize].size,
                self.regions[sb as usize].size,
            );
            if za >= zb {
                (sa, sb)
            } else {
                (sb, sa)
            }
        };
        let (w, h) = (self.width, self.height);

        // Lattice vertices touching both regions are the only ones whose
        // junction status or incident boundaries can change.
        let mut candidates: Vec<(usize, usize)> = Vec::new();
        for &p in &self.regions[gone as usize].pixels {
            let (x, y) = (p as usize % w, p as usize / w);
            for (vx, vy) in [(x, y), (x + 1, y), (x, y + 1), (x + 1, y + 1)] {
                if vx == 0 || vy == 0 || vx == w || vy == h {
                    continue;
                }
                if self
                    .vertex_pixels(vx, vy)
                    .iter()
                    .any(|&q| self.owner[q] == keep)
                {
                    candidates.push((vx, vy));
                }
            }
        }
        candidates.sort_unstable();
        candidates.dedup();
        let mut tally = BTreeMap::new();
        for &(vx, vy) in &candidates {
            self.vertex_contributions(vx, vy, Some((gone, keep)), -1, &mut tally);
        }

        let gone_region = std::mem::replace(
            &mut self.regions[gone as usize],
            Region {
                alive: false,
                node: u32::MAX,
                version: 0,
                size: 0,
                pixels: Vec::new(),
                color_hist: Vec::new(),
                texture_hist: Vec::new(),
                color_bits: 0.0,
                texture_bits: 0.0,
                sem: Vec::new(),
                label: 0,
                internal_regularity: 0.0,
                neighbors: BTreeMap::new(),
            },
        );
        for &p in &gone_region.pixels {
            self.owner[p as usize] = keep;
        }
        for &(vx, vy) in &candidates {
            self.vertex_contributions(vx, vy, None, 1, &mut tally);
        }

        let crossing = self.segments[s as usize].regularity;
        self.segments[s as usize].alive = false;
        let old_keep_label;
        let new_label;
        let nodes;
        {
            let k = &mut self.regions[keep as usize];
            nodes = ordered(k.node, gone_region.node);
            old_keep_label = k.label;
            k.size += gone_region.size;
            k.pixels.extend_from_slice(&gone_region.pixels);
            for (x, y) in k.color_hist.iter_mut().zip(&gone_region.color_hist) {
                *x += y;
            }
            for (x, y) in k.texture_hist.iter_mut().zip(&gone_region.texture_hist) {
                *x += y;
            }
            k.color_bits = code_length(k.color_hist.iter().copied());
            k.texture_bits = code_length(k.texture_hist.iter().copied());
            for (x, y) in k.sem.iter_mut().zip(&gone_region.sem) {
                *x += y;
            }
            k.label = argmin(&k.sem);
            k.internal_regularity += gone_region.internal_regularity + crossing;
            k.version += 1;
            k.neighbors.remove(&gone);
            new_label = k.label;
        }
        self.groups[old_keep_label].remove(&keep);
        self.groups[gone_region.label].remove(&gone);
        self.groups[new_label].insert(keep);

        for (&r, &seg) in &gone_region.neighbors {
            if r == keep {
                continue;
            }
            self.regions[r as usize].neighbors.remove(&gone);
            match self.regions[keep as usize].neighbors.get(&r).copied() {
                Some(target) => {
                    let src = self.segments[seg as usize].clone();
                    let t = &mut self.segments[target as usize];
                    t.edges += src.edges;
                    t.corners += src.corners;
                    t.regularity += src.regularity;
                    t.mid_sum.0 += src.mid_sum.0;
                    t.mid_sum.1 += src.mid_sum.1;
                    self.segments[seg as usize].alive = false;
                }
                None => {
                    let (a, b) = ordered(r, keep);
                    let t = &mut self.segments[seg as usize];
                    t.a = a;
                    t.b = b;
                    self.regions[keep as usize].neighbors.insert(r, seg);
                    self.regions[r as usize].neighbors.insert(keep, seg);
                }
            }
        }
        for ((a, b), d) in tally {
            if d == 0 {
                continue;
            }
            let seg = self.regions[a as usize].neighbors[&b];
            let c = &mut self.segments[seg as usize].corners;
            *c = (*c as i64 + d) as u32;
        }

        self.regions[gone as usize].alive = false;
        self.live -= 1;
        let segs: Vec<u32> = self.regions[keep as usize]
            .neighbors
            .values()
            .copied()
            .collect();
        for seg in segs {
            self.table_segment(seg);
        }

        let t = self.events.len();
        let n = (w * h) as u32;
        let new = n + t as u32;
        self.regions[keep as usize].node = new;
        if lambda < self.lambda_star {
            self.violations += 1;
        }
        self.lambda_star = self.lambda_star.max(lambda);
        let event = MergeEvent {
            t,
            a: nodes.0,
            b: nodes.1,
            new,
            lambda_raw: lambda,
            lambda_star: self.lambda_star,
            label: new_label,
        };
        self.events.push(event);
        event
    }

    /// Merges while the cheapest pair costs less than the configured stop
    /// threshold.
    pub fn run(&mut self) -> RunOutput {
        let stop = self.cfg.stop_threshold();
        while self.live > 1 {
            match self.fresh_min() {
                Some(head) if head.lambda < stop => {
                    self.table.remove_front();
                    self.merge_segment(head.handle, head.lambda);
                }
                _ => break,
            }
        }
        self.output()
    }

    /// Current partition, ids in raster order of each region's first pixel.
    pub fn partition(&self) -> LabelMap {
        self.partition_with_ids().0
    }

    fn partition_with_ids(&self) -> (LabelMap, BTreeMap<u32, u32>) {
        let mut ids = BTreeMap::new();
        let labels = self
            .owner
            .iter()
            .map(|&o| {
                let next = ids.len() as u32;
                *ids.entry(o).or_insert(next)
            })
            .collect();
        let map = LabelMap::new(self.width, self.height, labels).expect("owner covers grid");
        (map, ids)
    }

    pub fn output(&self) -> RunOutput {
        let (labels, ids) = self.partition_with_ids();
        let groups = self
            .groups
            .iter()
            .map(|g| {
                let mut v: Vec<u32> = g.iter().map(|r| ids[r]).collect();
                v.sort_unstable();
                v
            })
            .collect();
        RunOutput {
            labels,
            groups,
            events: self.events.clone(),
        }
    }

    /// Recomputes every maintained statistic from the pixels and compares.
    /// Intended for tests; cost is linear in the image per call.
    pub fn validate(&self) -> Result<(), String> {
        let n = self.width * self.height;
        let mut total = 0usize;
        let mut seen_in_groups = 0usize;
        for (slot, reg) in self.regions.iter().enumerate() {
            if !reg.alive {
                continue;
            }
            let slot = slot as u32;
            total += reg.pixels.len();
            if reg.pixels.len() != reg.size as usize {
                return Err(format!(
                    "region {slot}: size {} vs pixels {}",
                    reg.size,
                    reg.pixels.len()
                ));
            }
            let mut ch = vec![0u32; reg.color_hist.len()];
            let mut th = vec![0u32; reg.texture_hist.len()];
            let mut sem = vec![0.0f64; reg.sem.len()];
            for &p in &reg.pixels {
                if self.owner[p as usize] != slot {
                    return Err(format!("pixel {p} listed in {slot} but owned elsewhere"));
                }
                ch[self.color_ids[p as usize] as usize] += 1;
                th[self.texture_ids[p as usize] as usize] += 1;
                for (acc, c) in sem.iter_mut().zip(self.semantic.pixel(p as usize)) {
                    *acc += c;
                }
            }
            if ch != reg.color_hist || th != reg.texture_hist {
                return Err(format!("region {slot}: histogram drift"));
            }
            if sem != reg.sem {
                return Err(format!(
                    "region {slot}: semantic sums {:?} vs {:?}",
                    reg.sem, sem
                ));
            }
            if reg.label != argmin(&sem) {
                return Err(format!("region {slot}: stale label"));
            }
            for (l, g) in self.groups.iter().enumerate() {
                if g.contains(&slot) != (l == reg.label) {
                    return Err(format!("region {slot}: group membership wrong for {l}"));
                }
            }
            seen_in_groups += 1;
        }
        if total != n {
            return Err(format!("regions cover {total} of {n} pixels"));
        }
        if self.groups.iter().map(BTreeSet::len).sum::<usize>() != seen_in_groups
            || seen_in_groups != self.live
        {
            return Err("groups hold dead regions".into());
        }
        // Boundary statistics from scratch.
        let (w, h) = (self.width, self.height);
        let mut expect: BTreeMap<(u32, u32), (u32, f64)> = BTreeMap::new();
        for y in 0..h {
            for x in 0..w {
                let p = y * w + x;
                if x + 1 < w && self.owner[p] != self.owner[p + 1] {
                    let e = expect
                        .entry(ordered(self.owner[p], self.owner[p + 1]))
                        .or_default();
                    e.0 += 1;
                    e.1 += self.regularity.horizontal(x, y).total();
                }
                if y + 1 < h && self.owner[p] != self.owner[p + w] {
                    let e = expect
                        .entry(ordered(self.owner[p], self.owner[p + w]))
                        .or_default();
                    e.0 += 1;
                    e.1 += self.regularity.vertical(x, y).total();
                }
            }
        }
        let mut corners = BTreeMap::new();
        for vy in 1..h {
            for vx in 1..w {
                self.vertex_contributions(vx, vy, None, 1, &mut corners);
            }
        }
        let mut live_segments = 0;
        for seg in self.segments.iter().filter(|s| s.alive) {
            live_segments += 1;
            let Some(&(edges, reg)) = expect.get(&(seg.a, seg.b)) else {
                return Err(format!("segment {}-{} has no pixel edges", seg.a, seg.b));
            };
            if edges != seg.edges || (reg - seg.regularity).abs() > 1e-9 * (1.0 + reg.abs()) {
                return Err(format!(
                    "segment {}-{}: edge statistics drift",
                    seg.a, seg.b
                ));
            }
            let c = corners.get(&(seg.a, seg.b)).copied().unwrap_or(0);
            if c != seg.corners as i64 {
                return Err(format!(
                    "segment {}-{}: {} corners, recount {c}",
                    seg.a, seg.b, seg.corners
                ));
            }
        }
        if live_segments != expect.len() {
            return Err("adjacency is missing boundaries".into());
        }
        Ok(())
    }
}
