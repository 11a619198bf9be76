mod common;

use common::{max_grad_error, random_problem};
use qbias::debias::{DebiasConfig, DebiasMethod, MixLevel};
use qbias::model::ModelMode;

const TOL: f64 = 1e-3;

fn check(seed: u64, mode: ModelMode, debias: DebiasConfig) {
    let with_variant = debias.method != DebiasMethod::None;
    let p = random_problem(seed, 4, with_variant);
    let (err, at) = max_grad_error(&p, mode, &debias);
    assert!(err < TOL, "seed {seed} {mode:?} {debias:?}: {err:.3e} at {at}");
}

#[test]
fn cross_entropy_full_model() {
    for seed in 0..3 {
        check(seed, ModelMode::Full, DebiasConfig::default());
    }
}

#[test]
fn cross_entropy_question_only() {
    check(10, ModelMode::QOnly, DebiasConfig::default());
}

#[test]
fn contrastive_head() {
    for (seed, lambda, temperature) in [(20, 1.0, 1.0), (21, 0.3, 0.5)] {
        let d = DebiasConfig {
            method: DebiasMethod::Contrastive,
            lambda,
            temperature,
            ..DebiasConfig::default()
        };
        check(seed, ModelMode::Full, d);
    }
}

#[test]
fn feature_mixing_both_levels() {
    for (seed, level) in [(30, MixLevel::Question), (31, MixLevel::Fused)] {
        let d = DebiasConfig {
            method: DebiasMethod::Mixing,
            alpha: 0.3,
            mix_level: level,
            ..DebiasConfig::default()
        };
        check(seed, ModelMode::Full, d);
    }
}
