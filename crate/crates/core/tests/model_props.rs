mod common;

use qbias::debias::DebiasConfig;
use qbias::model::{classify, predict, Adam, AdamConfig, Model, ModelMode, Params};
use qbias::question::Vocab;
use qbias::trainer::{batch_objective, Prepared};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn ce(params: &Params<f64>, batch: &[&Prepared<f64>], cfg: &qbias::model::ModelConfig) -> f64 {
    let mut g = Params::zeros(cfg);
    batch_objective(params, batch, ModelMode::Full, &DebiasConfig::default(), &mut g)
        .unwrap()
        .ce
}

#[test]
fn two_hundred_adam_steps_reduce_the_loss() {
    let p = common::random_problem(7, 50, false);
    let batch: Vec<&Prepared<f64>> = p.batch.iter().collect();
    let mut params = p.params.clone();
    let start = ce(&params, &batch, &p.config);
    let mut adam = Adam::new(AdamConfig::default(), &p.config);
    let mut grads = Params::zeros(&p.config);
    for _ in 0..200 {
        grads.fill_zero();
        batch_objective(&params, &batch, ModelMode::Full, &DebiasConfig::default(), &mut grads).unwrap();
        adam.step(&mut params, &grads);
    }
    let end = ce(&params, &batch, &p.config);
    assert!(end < start, "{start} -> {end}");
}

#[test]
fn question_only_output_ignores_the_scene() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let vocab = Vocab::build(["what", "color", "is", "the", "cup"]);
    let answers: Vec<String> = ["red", "blue", "yes"].map(String::from).to_vec();
    let model = Model::<f64>::new(vocab, answers, 8, 6, 5, 7, &mut rng);
    let ids = model.vocab.pad(&["what", "color", "is", "the", "cup"], 8);
    let scene = |rng: &mut ChaCha8Rng, k: usize| -> Vec<Vec<f64>> {
        (0..k).map(|_| (0..6).map(|_| rng.random_range(-3.0..3.0)).collect()).collect()
    };
    let a = model.forward(&ids, &scene(&mut rng, 2), ModelMode::QOnly).unwrap();
    let b = model.forward(&ids, &scene(&mut rng, 5), ModelMode::QOnly).unwrap();
    assert_eq!(a.p, b.p);
}

#[test]
fn prediction_survives_a_shared_logit_shift() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let cfg = common::random_problem(4, 1, false).config;
    let mut params = Params::<f64>::init(&cfg, &mut rng);
    let h: Vec<f64> = (0..cfg.hidden_dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    let before = predict(&classify(&params, &h));
    for b in &mut params.cls_b.data {
        *b += 123.0;
    }
    assert_eq!(predict(&classify(&params, &h)), before);
}
