//! Closed-form pieces of the unit merging cost.

use serde::Serialize;

use super::EngineConfig;

/// Complexity decrease components for one candidate merge, in bits.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Deltas {
    pub color: f64,
    pub texture: f64,
    pub semantic: f64,
    pub regularity: f64,
    pub background: f64,
}

/// Total code length `n * H(hist)` of a discrete histogram, in bits.
pub fn code_length<I: IntoIterator<Item = u32>>(counts: I) -> f64 {
    let mut n = 0u64;
    let mut acc = 0.0;
    for c in counts {
        if c > 0 {
            n += c as u64;
            acc += c as f64 * (c as f64).log2();
        }
    }
    if n == 0 {
        return 0.0;
    }
    n as f64 * (n as f64).log2() - acc
}

/// Logistic gate on the load-normalized regularity decrease.
pub fn soft_switch(d_r: f64, load: f64, alpha: f64, beta: f64) -> f64 {
    1.0 / (1.0 + (-alpha * (d_r / load - beta)).exp())
}

/// Expected semantic decrease of two background regions that may hold
/// different unmodelled categories; zero unless both are background.
pub fn d_background(
    labels: (usize, usize),
    sizes: (u32, u32),
    background: usize,
    eta: f64,
    delta_gamma: f64,
) -> f64 {
    if labels.0 == background && labels.1 == background {
        eta * delta_gamma * sizes.0.min(sizes.1) as f64
    } else {
        0.0
    }
}

pub fn unit_merging_cost(d: &Deltas, sigma: f64, load: f64, cfg: &EngineConfig) -> f64 {
    let gated = cfg.w_c * d.color + cfg.w_t * d.texture + cfg.w_s * d.semantic;
    (sigma * gated + cfg.w_u * d.background + cfg.w_r * d.regularity) / load
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn midpoint_is_half() {
        assert_eq!(soft_switch(1.0, 2.0, 7.0, 0.5), 0.5);
        assert_eq!(soft_switch(0.0, 1.0, 123.0, 0.0), 0.5);
    }

    #[test]
    fn saturation() {
        assert!((soft_switch(3.5, 1.0, 1000.0, 2.5) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn closed_form_value() {
        // 1 / (1 + e^2)
        let expected = 0.119_202_922_022_117_57;
        assert!((soft_switch(0.0, 1.0, 4.0, 0.5) - expected).abs() < 1e-15);
    }

    #[test]
    fn background_term() {
        assert!((d_background((0, 0), (10, 20), 0, 0.5, 2.2) - 11.0).abs() < 1e-12);
        assert_eq!(d_background((1, 0), (10, 20), 0, 0.5, 2.2), 0.0);
        assert_eq!(d_background((0, 0), (10, 20), 0, 0.0, 2.2), 0.0);
    }

    #[test]
    fn hand_substitution() {
        let cfg = EngineConfig::default();
        let d = Deltas {
            color: 2.0,
            texture: 0.0,
            semantic: 2.0,
            regularity: 1.0,
            background: 1.0,
        };
        assert_eq!(unit_merging_cost(&d, 0.5, 2.0, &cfg), 2.0);
        assert_eq!(unit_merging_cost(&Deltas::default(), 0.3, 5.0, &cfg), 0.0);
        let cfg = EngineConfig { w_r: 0.0, ..cfg };
        let noisy = Deltas {
            color: 50.0,
            semantic: 80.0,
            ..Default::default()
        };
        assert!(unit_merging_cost(&noisy, 1e-12, 4.0, &cfg) < 1e-9);
    }

    #[test]
    fn mixture_entropy() {
        assert_eq!(code_length([4, 4]), 8.0);
        assert_eq!(code_length([7]), 0.0);
        assert_eq!(code_length([0, 0]), 0.0);
    }
}
