//! Oracles shared by the integration tests. Nothing here calls the code it
//! checks except to obtain the quantity under test.

#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap};

use qbias::debias::DebiasConfig;
use qbias::metrics::PredictionRecord;
use qbias::model::{ModelConfig, ModelMode, Params};
use qbias::question::AnswerType;
use qbias::trainer::{batch_objective, Prepared};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FD_EPS: f64 = 1e-4;

pub struct Problem {
    pub config: ModelConfig,
    pub params: Params<f64>,
    pub batch: Vec<Prepared<f64>>,
}

/// Small random model and batch. Ids include padding at random tail lengths.
pub fn random_problem(seed: u64, n: usize, with_variant: bool) -> Problem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let config = ModelConfig {
        vocab_size: 9,
        max_len: 6,
        obj_dim: 5,
        num_answers: 4,
        embed_dim: 4,
        hidden_dim: 5,
    };
    // larger than the training init so every nonlinearity is exercised
    let mut params = Params::<f64>::zeros(&config);
    for (_, t) in params.tensors_mut() {
        for x in &mut t.data {
            *x = rng.random_range(-0.6..0.6);
        }
    }
    let ids = |rng: &mut ChaCha8Rng| {
        let len = rng.random_range(1..=config.max_len);
        let mut v: Vec<u32> = (0..len).map(|_| rng.random_range(1..config.vocab_size as u32)).collect();
        v.resize(config.max_len, 0);
        v
    };
    let batch = (0..n)
        .map(|_| {
            let k = rng.random_range(1..=3);
            let mut target = vec![0.0; config.num_answers];
            target[rng.random_range(0..config.num_answers)] = 1.0;
            Prepared {
                ids: ids(&mut rng),
                variant_ids: with_variant.then(|| ids(&mut rng)),
                objects: (0..k)
                    .map(|_| (0..config.obj_dim).map(|_| rng.random_range(-1.0..1.0)).collect())
                    .collect(),
                target,
            }
        })
        .collect();
    Problem { config, params, batch }
}

fn loss(p: &Problem, params: &Params<f64>, mode: ModelMode, debias: &DebiasConfig) -> f64 {
    let refs: Vec<&Prepared<f64>> = p.batch.iter().collect();
    let mut scratch = Params::zeros(&p.config);
    batch_objective(params, &refs, mode, debias, &mut scratch).unwrap().total
}

/// Worst relative error between the analytic gradient and a central
/// difference, over every entry of every tensor.
pub fn max_grad_error(p: &Problem, mode: ModelMode, debias: &DebiasConfig) -> (f64, String) {
    let refs: Vec<&Prepared<f64>> = p.batch.iter().collect();
    let mut grads = Params::zeros(&p.config);
    batch_objective(&p.params, &refs, mode, debias, &mut grads).unwrap();
    let analytic: Vec<(String, Vec<f64>)> = grads
        .tensors()
        .iter()
        .map(|(n, t)| (n.to_string(), t.data.clone()))
        .collect();
    let mut worst = (0.0, String::new());
    let mut probe = p.params.clone();
    for (ti, (name, a)) in analytic.iter().enumerate() {
        for i in 0..a.len() {
            let orig = probe.tensors()[ti].1.data[i];
            probe.tensors_mut()[ti].1.data[i] = orig + FD_EPS;
            let up = loss(p, &probe, mode, debias);
            probe.tensors_mut()[ti].1.data[i] = orig - FD_EPS;
            let down = loss(p, &probe, mode, debias);
            probe.tensors_mut()[ti].1.data[i] = orig;
            let numeric = (up - down) / (2.0 * FD_EPS);
            let err = (a[i] - numeric).abs() / a[i].abs().max(numeric.abs()).max(1e-6);
            if err > worst.0 {
                worst = (err, format!("{name}[{i}] analytic={} numeric={numeric}", a[i]));
            }
        }
    }
    worst
}

pub fn random_records(rng: &mut ChaCha8Rng, n: usize) -> (Vec<PredictionRecord>, Vec<PredictionRecord>) {
    let qtypes = ["is there", "how many", "what color is the", "are there", "what is the"];
    let answers = ["yes", "no", "2", "red", "blue"];
    let mut orig = Vec::with_capacity(n);
    let mut var = Vec::with_capacity(n);
    for i in 0..n {
        let id = 1000 + 7 * i as u64;
        let qtype = qtypes[rng.random_range(0..qtypes.len())].to_string();
        let at = AnswerType::ALL[rng.random_range(0..3)];
        let gold = answers[rng.random_range(0..answers.len())].to_string();
        let pick = |rng: &mut ChaCha8Rng| {
            if rng.random_bool(0.55) {
                gold.clone()
            } else {
                answers[rng.random_range(0..answers.len())].to_string()
            }
        };
        orig.push(PredictionRecord::new(id, pick(rng), gold.clone(), qtype.clone(), at));
        var.push(PredictionRecord::new(id, pick(rng), gold.clone(), qtype, at));
    }
    // the variant dump comes in a different order
    for i in (1..var.len()).rev() {
        let j = rng.random_range(0..=i);
        var.swap(i, j);
    }
    (orig, var)
}

/// Brute-force reference metrics.
pub mod reference {
    use super::*;

    pub fn pct(num: usize, den: usize) -> Option<f64> {
        if den == 0 {
            None
        } else {
            Some(num as f64 * 100.0 / den as f64)
        }
    }

    /// (correct, total) for every answer type and for every qtype.
    pub fn accuracy(recs: &[PredictionRecord]) -> (usize, usize, HashMap<AnswerType, (usize, usize)>, HashMap<String, (usize, usize)>) {
        let mut correct = 0;
        let mut by_type = HashMap::new();
        let mut by_qtype = HashMap::new();
        for r in recs {
            let ok = r.pred == r.gold;
            correct += ok as usize;
            let e = by_type.entry(r.answer_type).or_insert((0, 0));
            e.0 += ok as usize;
            e.1 += 1;
            let e = by_qtype.entry(r.qtype.clone()).or_insert((0, 0));
            e.0 += ok as usize;
            e.1 += 1;
        }
        (correct, recs.len(), by_type, by_qtype)
    }

    fn partner<'a>(r: &PredictionRecord, var: &'a [PredictionRecord]) -> &'a PredictionRecord {
        var.iter().find(|v| v.question_id == r.question_id).expect("aligned")
    }

    pub fn rob(orig: &[PredictionRecord], var: &[PredictionRecord]) -> Option<f64> {
        let mut base = 0;
        let mut both = 0;
        for r in orig {
            if r.pred == r.gold {
                base += 1;
                let v = partner(r, var);
                if v.pred == v.gold {
                    both += 1;
                }
            }
        }
        pct(both, base)
    }

    pub fn flips(orig: &[PredictionRecord], var: &[PredictionRecord]) -> (Option<f64>, Option<f64>) {
        let (mut right, mut wrong, mut c2w, mut w2c) = (0, 0, 0, 0);
        for r in orig {
            let v = partner(r, var);
            match (r.pred == r.gold, v.pred == v.gold) {
                (true, false) => {
                    right += 1;
                    c2w += 1
                }
                (true, true) => right += 1,
                (false, true) => {
                    wrong += 1;
                    w2c += 1
                }
                (false, false) => wrong += 1,
            }
        }
        (pct(c2w, right), pct(w2c, wrong))
    }

    /// answer type → qtype → count, for one flip direction.
    pub fn breakdown(
        orig: &[PredictionRecord],
        var: &[PredictionRecord],
        from_correct: bool,
        top_k: usize,
    ) -> BTreeMap<AnswerType, Vec<(String, usize)>> {
        let mut counts: BTreeMap<AnswerType, BTreeMap<String, usize>> = BTreeMap::new();
        for r in orig {
            let v = partner(r, var);
            if (r.pred == r.gold) == from_correct && (v.pred == v.gold) != from_correct {
                *counts.entry(r.answer_type).or_default().entry(r.qtype.clone()).or_default() += 1;
            }
        }
        counts
            .into_iter()
            .map(|(t, m)| {
                let mut v: Vec<(String, usize)> = m.into_iter().collect();
                // selection sort by count desc, name asc
                for i in 0..v.len() {
                    let mut best = i;
                    for j in i + 1..v.len() {
                        if v[j].1 > v[best].1 || (v[j].1 == v[best].1 && v[j].0 < v[best].0) {
                            best = j;
                        }
                    }
                    v.swap(i, best);
                }
                v.truncate(top_k);
                (t, v)
            })
            .collect()
    }

    pub fn simi(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
        let mut total = 0.0;
        for (x, y) in a.iter().zip(b) {
            let mut xy = 0.0;
            let mut xx = 0.0;
            let mut yy = 0.0;
            for k in 0..x.len() {
                xy += x[k] * y[k];
                xx += x[k] * x[k];
                yy += y[k] * y[k];
            }
            total += xy / (xx.sqrt() * yy.sqrt());
        }
        1.0 - total / a.len() as f64
    }
}
