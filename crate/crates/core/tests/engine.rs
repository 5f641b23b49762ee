mod common;

use common::{random_config, random_cues, NaiveEngine};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use seglep::cues::{ClusterAssignment, CueConfig, Cues, EdgeWeightField, SemanticCostField};
use seglep::engine::{EngineConfig, EtaPrior, MergeState};
use seglep::pipeline::compute_cues;
use seglep::raster::{RasterImage, SemanticMap};

fn assert_same_sequence(cues: &Cues, cfg: EngineConfig) {
    let mut engine = MergeState::new(cues, cfg).unwrap();
    let out = engine.run();
    let mut naive = NaiveEngine::new(cues, cfg);
    naive.run(cfg.stop_threshold());
    assert_eq!(out.events.len(), naive.events.len());
    for (e, r) in out.events.iter().zip(&naive.events) {
        assert_eq!(
            (e.a, e.b, e.new, e.label),
            (r.a, r.b, r.new, r.label),
            "event {}",
            e.t
        );
        assert!((e.lambda_raw - r.lambda_raw).abs() <= 1e-9, "event {}", e.t);
        assert!((e.lambda_star - r.lambda_star).abs() <= 1e-9);
    }
    assert_eq!(out.labels, naive.partition());
}

#[test]
fn matches_naive_engine_on_random_fixtures() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let (w, h) = (rng.gen_range(1..=10), rng.gen_range(1..=10));
        let cues = random_cues(&mut rng, w, h);
        assert_same_sequence(&cues, random_config(&mut rng));
    }
}

/// 4x4, left half red and right half blue, categories following the colors.
fn two_tone() -> Cues {
    let img = RasterImage::from_fn(
        4,
        4,
        |x, _| if x < 2 { [220, 20, 20] } else { [20, 20, 220] },
    );
    let names = common::CATEGORIES.iter().map(|s| s.to_string()).collect();
    let probs = (0..16)
        .flat_map(|p| {
            if p % 4 < 2 {
                [0.1, 0.8, 0.1]
            } else {
                [0.1, 0.1, 0.8]
            }
        })
        .collect();
    let sem = SemanticMap::new(4, 4, names, probs).unwrap();
    compute_cues(&img, &sem, None, &CueConfig::default()).unwrap()
}

#[test]
fn two_tone_sequence_matches_naive() {
    assert_same_sequence(&two_tone(), EngineConfig::default());
}

#[test]
fn stop_below_cross_cost_leaves_the_halves() {
    let cues = two_tone();
    let mut naive = NaiveEngine::new(&cues, EngineConfig::default());
    naive.run(f64::INFINITY);
    let cross = naive.events.last().unwrap().lambda_raw;
    assert!(cross > 0.0);
    let cfg = EngineConfig {
        lambda_stop: Some(cross),
        ..Default::default()
    };
    let out = MergeState::new(&cues, cfg).unwrap().run();
    assert_eq!(
        out.labels.labels(),
        (0..16).map(|p| (p % 4 >= 2) as u32).collect::<Vec<_>>()
    );
    assert_eq!(out.groups[1], [0]);
    assert_eq!(out.groups[2], [1]);
}

#[test]
fn identical_runs_are_identical() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let cues = random_cues(&mut rng, 12, 9);
    let cfg = random_config(&mut rng);
    let a = MergeState::new(&cues, cfg).unwrap().run();
    let b = MergeState::new(&cues, cfg).unwrap().run();
    let bits = |o: &seglep::RunOutput| {
        o.events
            .iter()
            .map(|e| (e.a, e.b, e.lambda_raw.to_bits(), e.lambda_star.to_bits()))
            .collect::<Vec<_>>()
    };
    assert_eq!(bits(&a), bits(&b));
}

#[test]
fn dimension_mismatch_is_rejected() {
    let sem = SemanticCostField::from_costs(2, 2, 2, 0, vec![1.0; 8]).unwrap();
    let err = MergeState::from_parts(
        &ClusterAssignment::uniform(3),
        &ClusterAssignment::uniform(4),
        &EdgeWeightField::zeros(2, 2),
        &sem,
        EngineConfig::default(),
    );
    assert!(err.is_err());
}

#[test]
fn invariants_after_every_merge() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..5 {
        let cues = random_cues(&mut rng, 9, 7);
        let mut s = MergeState::new(&cues, random_config(&mut rng)).unwrap();
        while s.region_count() > 1 {
            s.merge_step().unwrap();
            s.validate().unwrap();
        }
        assert_eq!(
            s.monotonicity_violations(),
            s.events()
                .iter()
                .filter(|e| e.lambda_raw < e.lambda_star)
                .count()
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn deltas_are_nonnegative(seed in any::<u64>(), steps in 0usize..40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cues = random_cues(&mut rng, 8, 8);
        let cfg = EngineConfig {
            eta_prior: EtaPrior::Radial { min: 0.1, max: 0.9 },
            ..random_config(&mut rng)
        };
        let mut s = MergeState::new(&cues, cfg).unwrap();
        for _ in 0..steps {
            s.merge_step().unwrap();
        }
        for p in 0..64 {
            let r = s.region_of_pixel(p);
            for q in s.neighbors(r).unwrap() {
                let d = s.delta_components(r, q).unwrap();
                for v in [d.color, d.texture, d.semantic, d.regularity, d.background] {
                    prop_assert!(v >= -1e-9);
                }
            }
        }
    }

    #[test]
    fn semantic_sums_are_exact(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cues = random_cues(&mut rng, 7, 6);
        let mut s = MergeState::new(&cues, random_config(&mut rng)).unwrap();
        for _ in 0..30 {
            s.merge_step().unwrap();
            let r = s.region_of_pixel(rng.gen_range(0..42));
            let mut sums = vec![0.0; 3];
            for p in (0..42).filter(|&p| s.region_of_pixel(p) == r) {
                for (a, c) in sums.iter_mut().zip(cues.semantic.pixel(p)) {
                    *a += c;
                }
            }
            prop_assert_eq!(s.region_semantic(r).unwrap(), &sums[..]);
        }
    }
}
