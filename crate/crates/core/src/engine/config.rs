use serde::{Deserialize, Serialize};

use super::EngineError;

/// Prior probability that two background regions hold different true
/// categories.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EtaPrior {
    Constant {
        eta: f64,
    },
    /// Grows linearly from `min` at the image center to `max` at the corners,
    /// evaluated at the midpoint of the shared boundary.
    Radial {
        min: f64,
        max: f64,
    },
}

impl Default for EtaPrior {
    fn default() -> Self {
        EtaPrior::Constant { eta: 0.5 }
    }
}

impl EtaPrior {
    /// `point` is in lattice coordinates (`0..=width`, `0..=height`).
    pub fn eval(&self, point: (f64, f64), width: usize, height: usize) -> f64 {
        match *self {
            EtaPrior::Constant { eta } => eta,
            EtaPrior::Radial { min, max } => {
                let (cx, cy) = (width as f64 / 2.0, height as f64 / 2.0);
                let reach = (cx * cx + cy * cy).sqrt();
                let d = ((point.0 - cx).powi(2) + (point.1 - cy).powi(2)).sqrt();
                let frac = if reach > 0.0 {
                    (d / reach).min(1.0)
                } else {
                    0.0
                };
                min + (max - min) * frac
            }
        }
    }

    fn valid(&self) -> bool {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        match *self {
            EtaPrior::Constant { eta } => unit(eta),
            EtaPrior::Radial { min, max } => unit(min) && unit(max),
        }
    }
}

/// Weights, gate, insufficiency and stopping parameters of the merge loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineConfig {
    pub w_c: f64,
    pub w_t: f64,
    pub w_s: f64,
    pub w_r: f64,
    /// Weight of the background-insufficiency term.
    pub w_u: f64,
    /// Gate sharpness.
    pub alpha: f64,
    /// Gate midpoint, in regularity per unit load.
    pub beta: f64,
    /// Bits per pixel separating correct from wrong category code lengths.
    pub delta_gamma: f64,
    pub eta_prior: EtaPrior,
    /// Merging stops once the cheapest pair costs at least this much.
    /// `None` runs to a single region.
    pub lambda_stop: Option<f64>,
    /// Load per shared pixel edge.
    pub trace_a: f64,
    /// Load per junction corner.
    pub trace_b: f64,
    pub bucket_width: f64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            w_c: 1.0,
            w_t: 1.0,
            w_s: 1.0,
            w_r: 1.0,
            w_u: 1.0,
            alpha: 4.0,
            beta: 0.5,
            delta_gamma: 2.2,
            eta_prior: EtaPrior::default(),
            lambda_stop: None,
            trace_a: 1.0,
            trace_b: 5.0,
            bucket_width: 1e-4,
        }
    }
}

impl EngineConfig {
    pub fn stop_threshold(&self) -> f64 {
        self.lambda_stop.unwrap_or(f64::INFINITY)
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        let bad = |what: &str| Err(EngineError::InvalidConfig(what.to_string()));
        let weights = [self.w_c, self.w_t, self.w_s, self.w_r, self.w_u];
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return bad("weights must be finite and nonnegative");
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return bad("alpha must be positive");
        }
        if !self.beta.is_finite() {
            return bad("beta must be finite");
        }
        if !(self.delta_gamma >= 0.0 && self.delta_gamma.is_finite()) {
            return bad("delta_gamma must be nonnegative");
        }
        if !self.eta_prior.valid() {
            return bad("eta prior values must lie in [0, 1]");
        }
        if let Some(l) = self.lambda_stop {
            if !(l >= 0.0) {
                return bad("lambda_stop must be nonnegative");
            }
        }
        if !(self.trace_a > 0.0 && self.trace_a.is_finite()) {
            return bad("trace_a must be positive");
        }
        if !(self.trace_b >= 0.0 && self.trace_b.is_finite()) {
            return bad("trace_b must be nonnegative");
        }
        if !(self.bucket_width > 0.0 && self.bucket_width.is_finite()) {
            return bad("bucket_width must be positive");
        }
        Ok(())
    }
}
