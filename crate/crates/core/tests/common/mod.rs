//! Reference implementations and fixtures shared by the integration tests
//! and the acceptance suite. Everything here recomputes from scratch and
//! favors obviousness over speed.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use seglep::cues::{CueConfig, Cues};
use seglep::engine::{EngineConfig, EtaPrior};
use seglep::pipeline::compute_cues;
use seglep::raster::{ContourMap, LabelMap, RasterImage, SemanticMap};

// ---------------------------------------------------------------------------
// Fixtures

pub const CATEGORIES: [&str; 3] = ["background", "cat", "dog"];

/// Blocky random image over a small palette with matching semantic and
/// contour maps. Blocks share colors and categories often enough to produce
/// ties and zero-cost merges.
pub fn random_inputs<R: Rng>(
    rng: &mut R,
    w: usize,
    h: usize,
) -> (RasterImage, SemanticMap, ContourMap) {
    let palette: Vec<[u8; 3]> = (0..rng.gen_range(2..=5))
        .map(|_| [rng.gen(), rng.gen(), rng.gen()])
        .collect();
    let mut color = vec![0usize; w * h];
    let mut cat = vec![0usize; w * h];
    for _ in 0..rng.gen_range(1..=6) {
        let (x0, y0) = (rng.gen_range(0..w), rng.gen_range(0..h));
        let (x1, y1) = (rng.gen_range(x0..w) + 1, rng.gen_range(y0..h) + 1);
        let (c, l) = (rng.gen_range(0..palette.len()), rng.gen_range(0..3));
        for y in y0..y1 {
            for x in x0..x1 {
                color[y * w + x] = c;
                cat[y * w + x] = l;
            }
        }
    }
    let noise = rng.gen_range(0..3u8);
    let pixels = color
        .iter()
        .map(|&c| palette[c].map(|v| v.saturating_add(rng.gen_range(0..=noise))))
        .collect();
    let image = RasterImage::new(w, h, pixels).unwrap();
    let mut probs = Vec::with_capacity(w * h * 3);
    for &l in &cat {
        let favored = if rng.gen_bool(0.15) {
            rng.gen_range(0..3)
        } else {
            l
        };
        let p: f32 = rng.gen_range(0.4..0.95);
        for k in 0..3 {
            probs.push(if k == favored { p } else { (1.0 - p) / 2.0 });
        }
    }
    let names = CATEGORIES.iter().map(|s| s.to_string()).collect();
    let semantic = SemanticMap::new(w, h, names, probs).unwrap();
    let strength = (0..w * h)
        .map(|_| {
            if rng.gen_bool(0.2) {
                rng.gen_range(0.0..1.0)
            } else {
                0.0
            }
        })
        .collect();
    let contour = ContourMap::new(w, h, strength).unwrap();
    (image, semantic, contour)
}

pub fn random_cues<R: Rng>(rng: &mut R, w: usize, h: usize) -> Cues {
    let (img, sem, con) = random_inputs(rng, w, h);
    let cfg = CueConfig {
        color_clusters: rng.gen_range(1..=8),
        textons: rng.gen_range(1..=4),
        ..Default::default()
    };
    compute_cues(&img, &sem, Some(&con), &cfg).unwrap()
}

pub fn random_config<R: Rng>(rng: &mut R) -> EngineConfig {
    let weight = |rng: &mut R| [0.0, 0.5, 1.0, 2.0][rng.gen_range(0..4)];
    EngineConfig {
        w_c: weight(rng),
        w_t: weight(rng),
        w_s: weight(rng),
        w_r: weight(rng),
        w_u: weight(rng),
        alpha: rng.gen_range(0.5..8.0),
        beta: rng.gen_range(0.0..1.0),
        eta_prior: if rng.gen_bool(0.5) {
            EtaPrior::Constant {
                eta: rng.gen_range(0.0..1.0),
            }
        } else {
            EtaPrior::Radial { min: 0.2, max: 0.8 }
        },
        trace_b: [0.0, 1.0, 5.0][rng.gen_range(0..3)],
        ..Default::default()
    }
}

pub fn random_partition<R: Rng>(rng: &mut R, w: usize, h: usize) -> LabelMap {
    let k = rng.gen_range(1..=6);
    let labels = (0..w * h).map(|_| rng.gen_range(0..k)).collect();
    LabelMap::new(w, h, labels).unwrap()
}

/// Nearby pixels tend to share labels, giving larger and fewer regions
/// than [`random_partition`].
pub fn random_blocks<R: Rng>(rng: &mut R, w: usize, h: usize) -> LabelMap {
    let mut labels = vec![0u32; w * h];
    for id in 1..rng.gen_range(1..=5) {
        let (x0, y0) = (rng.gen_range(0..w), rng.gen_range(0..h));
        let (x1, y1) = (rng.gen_range(x0..w) + 1, rng.gen_range(y0..h) + 1);
        for y in y0..y1 {
            for x in x0..x1 {
                labels[y * w + x] = id;
            }
        }
    }
    LabelMap::new(w, h, labels).unwrap()
}

// ---------------------------------------------------------------------------
// Naive merge engine

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NaiveEvent {
    pub a: u32,
    pub b: u32,
    pub new: u32,
    pub lambda_raw: f64,
    pub lambda_star: f64,
    pub label: usize,
}

fn bits(hist: &BTreeMap<u32, u64>) -> f64 {
    let n: u64 = hist.values().sum();
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    -hist
        .values()
        .map(|&c| {
            let p = c as f64 / n;
            c as f64 * p.log2()
        })
        .sum::<f64>()
}

fn argmin(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x < v[best] {
            best = i;
        }
    }
    best
}

struct RegionStats {
    size: u64,
    colors: BTreeMap<u32, u64>,
    textons: BTreeMap<u32, u64>,
    sem: Vec<f64>,
}

#[derive(Default)]
struct PairStats {
    edges: u64,
    corners: u64,
    regularity: f64,
    mid: (f64, f64),
}

/// Recomputes every region statistic and every candidate cost before each
/// merge. Among the cheapest bucket it picks the pair tabled longest ago,
/// where tabling happens at start-up in raster order and again whenever one
/// side of the pair was just created.
pub struct NaiveEngine<'a> {
    cues: &'a Cues,
    cfg: EngineConfig,
    w: usize,
    h: usize,
    owner: Vec<u32>,
    node: BTreeMap<u32, u32>,
    tabled: BTreeMap<(u32, u32), u64>,
    clock: u64,
    lambda_star: f64,
    pub events: Vec<NaiveEvent>,
}

impl<'a> NaiveEngine<'a> {
    pub fn new(cues: &'a Cues, cfg: EngineConfig) -> Self {
        let (w, h) = (cues.semantic.width(), cues.semantic.height());
        let mut e = Self {
            cues,
            cfg,
            w,
            h,
            owner: (0..(w * h) as u32).collect(),
            node: (0..(w * h) as u32).map(|p| (p, p)).collect(),
            tabled: BTreeMap::new(),
            clock: 0,
            lambda_star: 0.0,
            events: Vec::new(),
        };
        for p in 0..w * h {
            let p32 = p as u32;
            if p % w + 1 < w {
                e.tabled.insert((p32, p32 + 1), e.clock);
                e.clock += 1;
            }
            if p / w + 1 < h {
                e.tabled.insert((p32, p32 + w as u32), e.clock);
                e.clock += 1;
            }
        }
        e
    }

    fn regions(&self) -> BTreeMap<u32, RegionStats> {
        let n_cat = self.cues.semantic.num_categories();
        let mut out: BTreeMap<u32, RegionStats> = BTreeMap::new();
        for (p, &o) in self.owner.iter().enumerate() {
            let r = out.entry(o).or_insert_with(|| RegionStats {
                size: 0,
                colors: BTreeMap::new(),
                textons: BTreeMap::new(),
                sem: vec![0.0; n_cat],
            });
            r.size += 1;
            *r.colors.entry(self.cues.colors.ids[p]).or_insert(0) += 1;
            *r.textons.entry(self.cues.textons.ids[p]).or_insert(0) += 1;
            for (acc, c) in r.sem.iter_mut().zip(self.cues.semantic.pixel(p)) {
                *acc += c;
            }
        }
        out
    }

    fn pairs(&self) -> BTreeMap<(u32, u32), PairStats> {
        let (w, h) = (self.w, self.h);
        let key = |a: u32, b: u32| (a.min(b), a.max(b));
        let mut out: BTreeMap<(u32, u32), PairStats> = BTreeMap::new();
        for y in 0..h {
            for x in 0..w {
                let p = y * w + x;
                if x + 1 < w && self.owner[p] != self.owner[p + 1] {
                    let s = out
                        .entry(key(self.owner[p], self.owner[p + 1]))
                        .or_default();
                    s.edges += 1;
                    s.regularity += self.cues.regularity.horizontal(x, y).total();
                    s.mid.0 += x as f64 + 1.0;
                    s.mid.1 += y as f64 + 0.5;
                }
                if y + 1 < h && self.owner[p] != self.owner[p + w] {
                    let s = out
                        .entry(key(self.owner[p], self.owner[p + w]))
                        .or_default();
                    s.edges += 1;
                    s.regularity += self.cues.regularity.vertical(x, y).total();
                    s.mid.0 += x as f64 + 0.5;
                    s.mid.1 += y as f64 + 1.0;
                }
            }
        }
        for vy in 1..h {
            for vx in 1..w {
                let tl = (vy - 1) * w + vx - 1;
                let o = [tl, tl + 1, tl + w, tl + w + 1].map(|p| self.owner[p]);
                if o.iter().collect::<BTreeSet<_>>().len() < 3 {
                    continue;
                }
                let touching: BTreeSet<(u32, u32)> = [(0, 1), (2, 3), (0, 2), (1, 3)]
                    .iter()
                    .filter(|&&(i, j)| o[i] != o[j])
                    .map(|&(i, j)| key(o[i], o[j]))
                    .collect();
                for k in touching {
                    out.get_mut(&k).unwrap().corners += 1;
                }
            }
        }
        out
    }

    fn cost(&self, ri: &RegionStats, rj: &RegionStats, s: &PairStats) -> f64 {
        let cfg = &self.cfg;
        let union = |a: &BTreeMap<u32, u64>, b: &BTreeMap<u32, u64>| {
            let mut u = a.clone();
            for (k, v) in b {
                *u.entry(*k).or_insert(0) += v;
            }
            u
        };
        let d_c = bits(&union(&ri.colors, &rj.colors)) - bits(&ri.colors) - bits(&rj.colors);
        let d_t = bits(&union(&ri.textons, &rj.textons)) - bits(&ri.textons) - bits(&rj.textons);
        let (li, lj) = (argmin(&ri.sem), argmin(&rj.sem));
        let joint: Vec<f64> = ri.sem.iter().zip(&rj.sem).map(|(a, b)| a + b).collect();
        let d_s = joint[argmin(&joint)] - ri.sem[li] - rj.sem[lj];
        let bkg = self.cues.semantic.background();
        let d_b = if li == bkg && lj == bkg {
            let e = s.edges as f64;
            let eta = cfg
                .eta_prior
                .eval((s.mid.0 / e, s.mid.1 / e), self.w, self.h);
            eta * cfg.delta_gamma * ri.size.min(rj.size) as f64
        } else {
            0.0
        };
        let load = cfg.trace_a * s.edges as f64 + cfg.trace_b * s.corners as f64;
        let sigma = 1.0 / (1.0 + (-cfg.alpha * (s.regularity / load - cfg.beta)).exp());
        (sigma * (cfg.w_c * d_c + cfg.w_t * d_t + cfg.w_s * d_s)
            + cfg.w_u * d_b
            + cfg.w_r * s.regularity)
            / load
    }

    fn bucket(&self, lambda: f64) -> u64 {
        let b = (lambda / self.cfg.bucket_width).floor();
        if b.is_nan() || b <= 0.0 {
            0
        } else {
            b as u64
        }
    }

    /// Cheapest candidate as `(pair, lambda)`.
    pub fn next(&self) -> Option<((u32, u32), f64)> {
        let regions = self.regions();
        let pairs = self.pairs();
        pairs
            .iter()
            .map(|(&(a, b), s)| {
                let lambda = self.cost(&regions[&a], &regions[&b], s);
                ((self.bucket(lambda), self.tabled[&(a, b)]), (a, b), lambda)
            })
            .min_by_key(|(order, _, _)| *order)
            .map(|(_, pair, lambda)| (pair, lambda))
    }

    pub fn step(&mut self) -> Option<NaiveEvent> {
        let ((a, b), lambda) = self.next()?;
        let regions = self.regions();
        let keep = if regions[&a].size >= regions[&b].size {
            a
        } else {
            b
        };
        let gone = if keep == a { b } else { a };
        for o in self.owner.iter_mut() {
            if *o == gone {
                *o = keep;
            }
        }
        let sem: Vec<f64> = regions[&a]
            .sem
            .iter()
            .zip(&regions[&b].sem)
            .map(|(x, y)| x + y)
            .collect();
        let (na, nb) = (self.node[&a], self.node[&b]);
        let new = (self.w * self.h + self.events.len()) as u32;
        self.node.remove(&gone);
        self.node.insert(keep, new);
        self.tabled
            .retain(|&(x, y), _| ![a, b].contains(&x) && ![a, b].contains(&y));
        let mut neighbors: Vec<u32> = self
            .pairs()
            .keys()
            .filter_map(|&(x, y)| {
                if x == keep {
                    Some(y)
                } else if y == keep {
                    Some(x)
                } else {
                    None
                }
            })
            .collect();
        neighbors.sort_unstable();
        for r in neighbors {
            self.tabled.insert((r.min(keep), r.max(keep)), self.clock);
            self.clock += 1;
        }
        self.lambda_star = self.lambda_star.max(lambda);
        let e = NaiveEvent {
            a: na.min(nb),
            b: na.max(nb),
            new,
            lambda_raw: lambda,
            lambda_star: self.lambda_star,
            label: argmin(&sem),
        };
        self.events.push(e);
        Some(e)
    }

    /// Merges while the next cost is below `stop`.
    pub fn run(&mut self, stop: f64) -> &[NaiveEvent] {
        while let Some((_, lambda)) = self.next() {
            if !(lambda < stop) {
                break;
            }
            self.step();
        }
        &self.events
    }

    pub fn partition(&self) -> LabelMap {
        let mut ids = BTreeMap::new();
        let labels = self
            .owner
            .iter()
            .map(|&o| {
                let next = ids.len() as u32;
                *ids.entry(o).or_insert(next)
            })
            .collect();
        LabelMap::new(self.w, self.h, labels).unwrap()
    }
}

// ---------------------------------------------------------------------------
// Metric oracles over explicit pixel sets and pixel pairs

fn regions_of(m: &LabelMap) -> BTreeMap<u32, BTreeSet<usize>> {
    let mut out: BTreeMap<u32, BTreeSet<usize>> = BTreeMap::new();
    for (p, &l) in m.labels().iter().enumerate() {
        out.entry(l).or_default().insert(p);
    }
    out
}

pub fn covering_oracle(s: &LabelMap, gt: &LabelMap) -> f64 {
    let (rs, rg) = (regions_of(s), regions_of(gt));
    let n = s.labels().len() as f64;
    rg.values()
        .map(|g| {
            let best = rs
                .values()
                .map(|r| {
                    let inter = g.intersection(r).count() as f64;
                    let union = g.union(r).count() as f64;
                    inter / union
                })
                .fold(0.0, f64::max);
            g.len() as f64 * best
        })
        .sum::<f64>()
        / n
}

pub fn rand_oracle(s: &LabelMap, gt: &LabelMap) -> f64 {
    let (a, b) = (s.labels(), gt.labels());
    let n = a.len();
    if n < 2 {
        return 1.0;
    }
    let mut agree = 0u64;
    let mut total = 0u64;
    for i in 0..n {
        for j in i + 1..n {
            total += 1;
            if (a[i] == a[j]) == (b[i] == b[j]) {
                agree += 1;
            }
        }
    }
    agree as f64 / total as f64
}

pub fn voi_oracle(s: &LabelMap, gt: &LabelMap) -> f64 {
    let (rs, rg) = (regions_of(s), regions_of(gt));
    let n = s.labels().len() as f64;
    let h = |rs: &BTreeMap<u32, BTreeSet<usize>>| {
        -rs.values()
            .map(|r| {
                let p = r.len() as f64 / n;
                p * p.log2()
            })
            .sum::<f64>()
    };
    let mut mi = 0.0;
    for r in rs.values() {
        for g in rg.values() {
            let k = r.intersection(g).count() as f64;
            if k > 0.0 {
                let pij = k / n;
                mi += pij * (pij / ((r.len() as f64 / n) * (g.len() as f64 / n))).log2();
            }
        }
    }
    h(&rs) + h(&rg) - 2.0 * mi
}

// ---------------------------------------------------------------------------
// PCA-tree reference

fn principal_axis_power(points: &[Vec<f64>], members: &[usize], mean: &[f64]) -> Vec<f64> {
    let d = mean.len();
    let mut cov = vec![vec![0.0; d]; d];
    for &m in members {
        for i in 0..d {
            for j in 0..d {
                cov[i][j] += (points[m][i] - mean[i]) * (points[m][j] - mean[j]);
            }
        }
    }
    // Covariance is positive semidefinite, so the dominant eigenvalue is the
    // largest one.
    let mut v: Vec<f64> = (0..d).map(|i| 1.0 + 0.37 * i as f64).collect();
    for _ in 0..5000 {
        let mut next: Vec<f64> = (0..d)
            .map(|i| (0..d).map(|j| cov[i][j] * v[j]).sum::<f64>())
            .collect();
        let norm = next.iter().map(|x| x * x).sum::<f64>().sqrt();
        next.iter_mut().for_each(|x| *x /= norm);
        let delta: f64 = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).sum();
        v = next;
        if delta < 1e-15 {
            break;
        }
    }
    let lead = (0..d)
        .max_by(|&i, &j| v[i].abs().total_cmp(&v[j].abs()).then(j.cmp(&i)))
        .unwrap();
    if v[lead] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
    v
}

/// Divisive PCA tree: split the leaf of largest spread (earliest created on
/// ties) at its mean projection. Returns a partition labelled by first
/// occurrence.
pub fn pca_tree_oracle(points: &[Vec<f64>], k: usize) -> Vec<u32> {
    let stats = |members: &[usize]| {
        let d = points[0].len();
        let mut mean = vec![0.0; d];
        for &m in members {
            for i in 0..d {
                mean[i] += points[m][i];
            }
        }
        mean.iter_mut().for_each(|x| *x /= members.len() as f64);
        let sse: f64 = members
            .iter()
            .map(|&m| {
                (0..d)
                    .map(|i| (points[m][i] - mean[i]).powi(2))
                    .sum::<f64>()
            })
            .sum();
        (mean, sse)
    };
    // (members, sse, creation index, splittable)
    let all: Vec<usize> = (0..points.len()).collect();
    let mut leaves = vec![(all.clone(), stats(&all).1, 0usize, true)];
    let mut created = 1;
    while leaves.len() < k {
        let pick = leaves
            .iter()
            .enumerate()
            .filter(|(_, l)| l.3 && l.1 > 1e-10 * l.0.len() as f64)
            .max_by(|(_, a), (_, b)| a.1.total_cmp(&b.1).then(b.2.cmp(&a.2)))
            .map(|(i, _)| i);
        let Some(i) = pick else { break };
        let (mean, _) = stats(&leaves[i].0);
        let axis = principal_axis_power(points, &leaves[i].0, &mean);
        let (low, high): (Vec<usize>, Vec<usize>) = leaves[i].0.iter().partition(|&&m| {
            (0..mean.len())
                .map(|j| (points[m][j] - mean[j]) * axis[j])
                .sum::<f64>()
                <= 0.0
        });
        if low.is_empty() || high.is_empty() {
            leaves[i].3 = false;
            continue;
        }
        let (sl, sh) = (stats(&low).1, stats(&high).1);
        leaves[i] = (low, sl, created, true);
        leaves.push((high, sh, created + 1, true));
        created += 2;
    }
    let mut raw = vec![0usize; points.len()];
    for (slot, l) in leaves.iter().enumerate() {
        for &m in &l.0 {
            raw[m] = slot;
        }
    }
    canonical(&raw)
}

/// Relabels by order of first occurrence.
pub fn canonical<T: Ord + Copy>(ids: &[T]) -> Vec<u32> {
    let mut map = BTreeMap::new();
    ids.iter()
        .map(|&i| {
            let next = map.len() as u32;
            *map.entry(i).or_insert(next)
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Partition relations

/// True when every region of `coarse` is a union of regions of `fine`.
pub fn nested(fine: &LabelMap, coarse: &LabelMap) -> bool {
    let mut parent: BTreeMap<u32, u32> = BTreeMap::new();
    fine.labels()
        .iter()
        .zip(coarse.labels())
        .all(|(&f, &c)| *parent.entry(f).or_insert(c) == c)
}

/// All-pairs minimax path level over the 4-connected pixel graph.
pub fn minimax_levels(w: usize, h: usize, edge: impl Fn(usize, usize) -> f64) -> Vec<Vec<f64>> {
    let n = w * h;
    let mut d = vec![vec![f64::INFINITY; n]; n];
    for p in 0..n {
        d[p][p] = 0.0;
        let (x, y) = (p % w, p / w);
        if x + 1 < w {
            d[p][p + 1] = edge(p, p + 1);
            d[p + 1][p] = d[p][p + 1];
        }
        if y + 1 < h {
            d[p][p + w] = edge(p, p + w);
            d[p + w][p] = d[p][p + w];
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let via = d[i][k].max(d[k][j]);
                if via < d[i][j] {
                    d[i][j] = via;
                }
            }
        }
    }
    d
}
