//! Fitting engine parameters on an annotated set by cyclic coordinate grid
//! search followed by one half-spacing refinement pass.
//!
//! Each configuration is scored by the dataset-optimal (ODS) value of the
//! objective over a stop-threshold sweep: every training image is run to a
//! single region once, and the sweep thresholds its hierarchy.

use std::collections::BTreeMap;
use std::fmt::Write as _;

#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cues::Cues;
use crate::engine::{EngineConfig, EtaPrior};
use crate::hierarchy::quantile_levels;
use crate::metrics::{score_partition, Better, Metric, ScoreSweep};
use crate::pipeline::{full_hierarchy, PipelineError};
use crate::raster::LabelMap;

#[derive(Debug, Error)]
pub enum CalibrateError {
    #[error("training set is empty")]
    EmptyTrainSet,
    #[error("invalid search space: {0}")]
    InvalidSpace(String),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
}

/// Engine parameters open to calibration, named as in the config file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Param {
    WC,
    WT,
    WS,
    WR,
    WU,
    Alpha,
    Beta,
    DeltaGamma,
    /// Constant insufficiency prior.
    Eta,
    TraceA,
    TraceB,
}

impl Param {
    pub fn name(self) -> &'static str {
        match self {
            Param::WC => "w_c",
            Param::WT => "w_t",
            Param::WS => "w_s",
            Param::WR => "w_r",
            Param::WU => "w_u",
            Param::Alpha => "alpha",
            Param::Beta => "beta",
            Param::DeltaGamma => "delta_gamma",
            Param::Eta => "eta",
            Param::TraceA => "trace_a",
            Param::TraceB => "trace_b",
        }
    }

    pub fn get(self, cfg: &EngineConfig) -> f64 {
        match self {
            Param::WC => cfg.w_c,
            Param::WT => cfg.w_t,
            Param::WS => cfg.w_s,
            Param::WR => cfg.w_r,
            Param::WU => cfg.w_u,
            Param::Alpha => cfg.alpha,
            Param::Beta => cfg.beta,
            Param::DeltaGamma => cfg.delta_gamma,
            Param::Eta => match cfg.eta_prior {
                EtaPrior::Constant { eta } => eta,
                EtaPrior::Radial { min, max } => (min + max) / 2.0,
            },
            Param::TraceA => cfg.trace_a,
            Param::TraceB => cfg.trace_b,
        }
    }

    pub fn set(self, cfg: &mut EngineConfig, v: f64) {
        match self {
            Param::WC => cfg.w_c = v,
            Param::WT => cfg.w_t = v,
            Param::WS => cfg.w_s = v,
            Param::WR => cfg.w_r = v,
            Param::WU => cfg.w_u = v,
            Param::Alpha => cfg.alpha = v,
            Param::Beta => cfg.beta = v,
            Param::DeltaGamma => cfg.delta_gamma = v,
            Param::Eta => cfg.eta_prior = EtaPrior::Constant { eta: v },
            Param::TraceA => cfg.trace_a = v,
            Param::TraceB => cfg.trace_b = v,
        }
    }
}

impl std::str::FromStr for Param {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        use Param::*;
        [
            WC, WT, WS, WR, WU, Alpha, Beta, DeltaGamma, Eta, TraceA, TraceB,
        ]
        .into_iter()
        .find(|p| p.name() == s)
        .ok_or_else(|| format!("unknown parameter {s:?}"))
    }
}

/// Ordered per-parameter grids. Parameters are visited in this order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub params: Vec<(Param, Vec<f64>)>,
}

impl Default for SearchSpace {
    fn default() -> Self {
        let weights = vec![0.0, 0.5, 1.0, 2.0, 4.0];
        Self {
            params: vec![
                (Param::WS, weights.clone()),
                (Param::WC, weights.clone()),
                (Param::WT, weights.clone()),
                (Param::WR, weights),
                (Param::Beta, vec![0.0, 0.25, 0.5, 1.0]),
                (Param::Eta, vec![0.0, 0.5, 0.8]),
            ],
        }
    }
}

/// One annotated training image, with its cues already computed.
#[derive(Debug, Clone)]
pub struct Sample {
    pub cues: Cues,
    pub truths: Vec<LabelMap>,
}

/// Improvement of the incumbent. Scores only ever improve along the trace.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceStep {
    pub step: usize,
    /// `None` for the starting point.
    pub param: Option<Param>,
    pub value: f64,
    pub score: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Calibration {
    /// Incumbent, with `lambda_stop` set to its ODS threshold.
    pub config: EngineConfig,
    pub score: f64,
    pub objective: Metric,
    pub trace: Vec<TraceStep>,
    pub evaluations: usize,
}

impl Calibration {
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("step,param,value,score,threshold\n");
        for s in &self.trace {
            let name = s.param.map_or("start", Param::name);
            writeln!(
                out,
                "{},{},{},{},{}",
                s.step, name, s.value, s.score, s.threshold
            )
            .expect("string write");
        }
        out
    }
}

/// ODS score of one configuration and the threshold reaching it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConfigScore {
    pub score: f64,
    pub threshold: f64,
}

/// Runs every sample to a single region, sweeps `levels` pooled quantiles of
/// the merge levels as stop thresholds, and returns the ODS of `objective`.
pub fn evaluate_config(
    train: &[Sample],
    cfg: &EngineConfig,
    objective: Metric,
    levels: usize,
) -> Result<ConfigScore, CalibrateError> {
    if train.is_empty() {
        return Err(CalibrateError::EmptyTrainSet);
    }
    let mut hierarchies = Vec::with_capacity(train.len());
    for s in train {
        hierarchies.push(full_hierarchy(&s.cues, cfg)?.1);
    }
    let pooled: Vec<f64> = hierarchies.iter().flat_map(|h| h.levels()).collect();
    let mut thresholds = quantile_levels(&pooled, levels.max(1));
    // Above every level the image is one region; keep that end of the sweep.
    let top = pooled.iter().copied().fold(0.0, f64::max);
    thresholds.push(if top > 0.0 { top * 2.0 } else { 1.0 });
    thresholds.dedup();
    let mut scores = Vec::with_capacity(train.len());
    for (s, h) in train.iter().zip(&hierarchies) {
        let mut row = Vec::with_capacity(thresholds.len());
        for &t in &thresholds {
            let seg = h.threshold(t);
            let tol = if objective == Metric::BoundaryF {
                None
            } else {
                Some(0.0)
            };
            let sc = score_partition(&seg, &s.truths, tol).map_err(PipelineError::from)?;
            row.push(sc.get(objective));
        }
        scores.push(row);
    }
    let sweep = ScoreSweep { thresholds, scores };
    let r = sweep
        .ods_ois(objective.better())
        .map_err(PipelineError::from)?;
    Ok(ConfigScore {
        score: r.ods,
        threshold: r.ods_threshold,
    })
}

fn improves(better: Better, candidate: f64, incumbent: f64) -> bool {
    match better {
        Better::Higher => candidate > incumbent,
        Better::Lower => candidate < incumbent,
    }
}

struct Search<'a> {
    train: &'a [Sample],
    objective: Metric,
    levels: usize,
    cache: BTreeMap<Vec<u64>, ConfigScore>,
}

impl Search<'_> {
    fn key(cfg: &EngineConfig, space: &SearchSpace) -> Vec<u64> {
        space
            .params
            .iter()
            .map(|(p, _)| p.get(cfg).to_bits())
            .collect()
    }

    /// Scores candidates in order, from cache where possible.
    fn score_all(
        &mut self,
        cands: &[EngineConfig],
        space: &SearchSpace,
    ) -> Result<Vec<ConfigScore>, CalibrateError> {
        let missing: Vec<&EngineConfig> = cands
            .iter()
            .filter(|c| !self.cache.contains_key(&Self::key(c, space)))
            .collect();
        let (train, objective, levels) = (self.train, self.objective, self.levels);
        #[cfg(feature = "parallel")]
        let fresh: Vec<_> = missing
            .par_iter()
            .map(|c| evaluate_config(train, c, objective, levels))
            .collect();
        #[cfg(not(feature = "parallel"))]
        let fresh: Vec<_> = missing
            .iter()
            .map(|c| evaluate_config(train, c, objective, levels))
            .collect();
        for (c, s) in missing.iter().zip(fresh) {
            self.cache.insert(Self::key(c, space), s?);
        }
        Ok(cands
            .iter()
            .map(|c| self.cache[&Self::key(c, space)])
            .collect())
    }
}

/// Grid point nearest to `v`, lowest on ties.
fn snap(grid: &[f64], v: f64) -> f64 {
    grid.iter()
        .copied()
        .fold(None, |best: Option<f64>, g| match best {
            Some(b) if (b - v).abs() <= (g - v).abs() => Some(b),
            _ => Some(g),
        })
        .expect("nonempty grid")
}

/// Cyclic coordinate search over `space` from `start`, then one refinement
/// pass trying the midpoints between each parameter's incumbent and its grid
/// neighbors. Candidates replace the incumbent only on strict improvement,
/// and the first best grid point wins ties.
pub fn grid_search(
    train: &[Sample],
    start: &EngineConfig,
    space: &SearchSpace,
    objective: Metric,
    levels: usize,
) -> Result<Calibration, CalibrateError> {
    if train.is_empty() {
        return Err(CalibrateError::EmptyTrainSet);
    }
    let mut space = space.clone();
    for (p, grid) in &mut space.params {
        if grid.is_empty() || grid.iter().any(|v| !v.is_finite()) {
            return Err(CalibrateError::InvalidSpace(format!(
                "grid of {} must be finite and nonempty",
                p.name()
            )));
        }
        grid.sort_by(f64::total_cmp);
        grid.dedup();
    }
    let mut seen = Vec::new();
    for (p, _) in &space.params {
        if seen.contains(p) {
            return Err(CalibrateError::InvalidSpace(format!(
                "{} listed twice",
                p.name()
            )));
        }
        seen.push(*p);
    }
    let mut incumbent = EngineConfig {
        lambda_stop: None,
        ..*start
    };
    for (p, grid) in &space.params {
        let v = snap(grid, p.get(&incumbent));
        p.set(&mut incumbent, v);
    }
    let check = |cfg: &EngineConfig| {
        cfg.validate()
            .map_err(|e| CalibrateError::InvalidSpace(e.to_string()))
    };
    check(&incumbent)?;
    let better = objective.better();
    let mut search = Search {
        train,
        objective,
        levels,
        cache: BTreeMap::new(),
    };
    let mut best = search.score_all(&[incumbent], &space)?[0];
    let mut trace = vec![TraceStep {
        step: 0,
        param: None,
        value: f64::NAN,
        score: best.score,
        threshold: best.threshold,
    }];

    let try_values = |p: Param,
                      values: &[f64],
                      incumbent: &mut EngineConfig,
                      best: &mut ConfigScore,
                      trace: &mut Vec<TraceStep>,
                      search: &mut Search|
     -> Result<bool, CalibrateError> {
        let cands: Vec<EngineConfig> = values
            .iter()
            .map(|&v| {
                let mut c = *incumbent;
                p.set(&mut c, v);
                c
            })
            .collect();
        for c in &cands {
            check(c)?;
        }
        let scores = search.score_all(&cands, &space)?;
        let mut pick: Option<usize> = None;
        for (i, s) in scores.iter().enumerate() {
            let reference = pick.map_or(best.score, |j| scores[j].score);
            if improves(better, s.score, reference) {
                pick = Some(i);
            }
        }
        let Some(i) = pick else { return Ok(false) };
        *incumbent = cands[i];
        *best = scores[i];
        trace.push(TraceStep {
            step: trace.len(),
            param: Some(p),
            value: values[i],
            score: best.score,
            threshold: best.threshold,
        });
        Ok(true)
    };

    // Each accepted move strictly improves a score drawn from a finite set
    // of grid configurations, so the cycle terminates.
    loop {
        let mut improved = false;
        for (p, grid) in &space.params {
            improved |= try_values(*p, grid, &mut incumbent, &mut best, &mut trace, &mut search)?;
        }
        if !improved {
            break;
        }
    }
    for (p, grid) in &space.params {
        let v = p.get(&incumbent);
        let i = grid
            .iter()
            .position(|&g| g == v)
            .expect("incumbent on grid");
        let mut mids = Vec::new();
        if i > 0 {
            mids.push((grid[i - 1] + v) / 2.0);
        }
        if i + 1 < grid.len() {
            mids.push((v + grid[i + 1]) / 2.0);
        }
        try_values(
            *p,
            &mids,
            &mut incumbent,
            &mut best,
            &mut trace,
            &mut search,
        )?;
    }
    incumbent.lambda_stop = Some(best.threshold);
    Ok(Calibration {
        config: incumbent,
        score: best.score,
        objective,
        trace,
        evaluations: search.cache.len(),
    })
}
