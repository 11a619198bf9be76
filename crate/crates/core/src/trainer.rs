//! Training and evaluation under the different question renderings.
//!
//! A run trains on one rendering of each training question (full question,
//! prefix only, postfix only, or a word-order variant) and is evaluated on any
//! rendering. Prefix- and postfix-only inputs keep the surviving words at
//! their original positions and pad the removed part.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::debias::{
    contrastive_loss_with_temperature, joint_loss, mix_features, ContrastiveBatch, DebiasConfig,
    DebiasMethod, MixLevel,
};
use crate::error::{Error, Result};
use crate::io;
use crate::metrics::PredictionRecord;
use crate::model::{
    ce_loss, classify, classify_backward, encode_question, encode_question_backward, fuse,
    fuse_backward, predict, Adam, AdamConfig, Encodings, InferenceSpec, MixSpec, Model, ModelMode,
    Params,
};
use crate::perturb::{self, mix64, VariantKind};
use crate::question::{Question, Vocab, DEFAULT_MAX_LEN, PAD, UNK};
use crate::scalar::Scalar;
use crate::synthgen::{Dataset, Sample, Split};

/// Which rendering of a question the model sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputMode {
    Question,
    Prefix,
    Postfix,
    Variant1,
    Variant2,
    Variant3,
    Identity,
}

impl InputMode {
    pub const ALL: [InputMode; 7] = [
        InputMode::Question,
        InputMode::Prefix,
        InputMode::Postfix,
        InputMode::Variant1,
        InputMode::Variant2,
        InputMode::Variant3,
        InputMode::Identity,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            InputMode::Question => "question",
            InputMode::Prefix => "prefix",
            InputMode::Postfix => "postfix",
            InputMode::Variant1 => "variant1",
            InputMode::Variant2 => "variant2",
            InputMode::Variant3 => "variant3",
            InputMode::Identity => "identity",
        }
    }

    pub fn variant(self) -> Option<VariantKind> {
        match self {
            InputMode::Variant1 => Some(VariantKind::Variant1),
            InputMode::Variant2 => Some(VariantKind::Variant2),
            InputMode::Variant3 => Some(VariantKind::Variant3),
            InputMode::Identity => Some(VariantKind::Identity),
            _ => None,
        }
    }
}

impl From<VariantKind> for InputMode {
    fn from(k: VariantKind) -> Self {
        match k {
            VariantKind::Identity => InputMode::Identity,
            VariantKind::Variant1 => InputMode::Variant1,
            VariantKind::Variant2 => InputMode::Variant2,
            VariantKind::Variant3 => InputMode::Variant3,
        }
    }
}

impl fmt::Display for InputMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for InputMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        InputMode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown input mode {s:?}")))
    }
}

/// Token rendering of `q` under `mode`, at most `max_len` long. Removed
/// parts are filled with the pad symbol; an input with no word left becomes
/// a single unknown token.
pub fn render(mode: InputMode, q: &Question, seed: u64, max_len: usize) -> Vec<String> {
    let mut tokens: Vec<String> = match mode {
        InputMode::Question => q.tokens.clone(),
        InputMode::Prefix => q.prefix().to_vec(),
        InputMode::Postfix => std::iter::repeat_n(PAD.to_string(), q.prefix().len())
            .chain(q.postfix().iter().cloned())
            .collect(),
        other => perturb::apply(other.variant().expect("variant mode"), q, seed),
    };
    tokens.truncate(max_len);
    if tokens.iter().all(|t| t == PAD) {
        tokens = vec![UNK.to_string()];
    }
    tokens
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub train_input: InputMode,
    pub model_mode: ModelMode,
    pub debias: DebiasConfig,
    pub seed: u64,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub max_len: usize,
    /// Redraw the shuffle variant every epoch instead of once per question.
    pub variant2_per_epoch: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            train_input: InputMode::Question,
            model_mode: ModelMode::Full,
            debias: DebiasConfig::default(),
            seed: 42,
            epochs: 15,
            batch_size: 128,
            lr: 1e-3,
            embed_dim: 64,
            hidden_dim: 128,
            max_len: DEFAULT_MAX_LEN,
            variant2_per_epoch: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.batch_size == 0 {
            return fail("batch_size must be positive".into());
        }
        if self.max_len == 0 {
            return fail("max_len must be positive".into());
        }
        if self.embed_dim == 0 || self.hidden_dim == 0 {
            return fail("embed_dim and hidden_dim must be positive".into());
        }
        if !(self.lr > 0.0) {
            return fail(format!("lr {} must be positive", self.lr));
        }
        if self.train_input == InputMode::Identity {
            return fail("identity is an evaluation-only input".into());
        }
        self.debias.validate()
    }

    fn uses_variant(&self) -> bool {
        self.debias.method != DebiasMethod::None
    }

    fn inference(&self) -> InferenceSpec {
        InferenceSpec {
            mode: self.model_mode,
            mix: (self.debias.method == DebiasMethod::Mixing).then(|| MixSpec {
                alpha: self.debias.alpha,
                variant_kind: self.debias.variant_kind,
                level: self.debias.mix_level,
                seed: self.seed,
            }),
        }
    }
}

/// A sample ready for the numeric core.
#[derive(Debug, Clone)]
pub struct Prepared<T> {
    pub ids: Vec<u32>,
    pub variant_ids: Option<Vec<u32>>,
    pub objects: Vec<Vec<T>>,
    pub target: Vec<T>,
}

pub fn to_objects<T: Scalar>(sample: &Sample) -> Vec<Vec<T>> {
    sample
        .scene
        .objects
        .iter()
        .map(|o| o.iter().map(|&x| T::lit(x)).collect())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossParts<T> {
    pub ce: T,
    pub con: T,
    pub total: T,
}

struct Forward<T> {
    q_orig: crate::model::QuestionTrace<T>,
    q_var: Option<crate::model::QuestionTrace<T>>,
    fused: crate::model::FuseTrace<T>,
    fused_var: Option<crate::model::FuseTrace<T>>,
    h: Vec<T>,
    p: Vec<T>,
}

/// Loss of one mini-batch under `debias`, accumulating the gradient of the
/// total loss into `grads`.
pub fn batch_objective<T: Scalar>(
    params: &Params<T>,
    batch: &[&Prepared<T>],
    mode: ModelMode,
    debias: &DebiasConfig,
    grads: &mut Params<T>,
) -> Result<LossParts<T>> {
    let alpha = T::lit(debias.alpha);
    let one = T::one();
    fn need_variant<'a, T>(s: &'a Prepared<T>, method: DebiasMethod) -> Result<&'a [u32]> {
        s.variant_ids
            .as_deref()
            .ok_or_else(|| Error::Config(format!("{method} debiasing needs variant inputs")))
    }
    let mut fwd = Vec::with_capacity(batch.len());
    for s in batch {
        let q_orig = encode_question(params, &s.ids)?;
        let step = match debias.method {
            DebiasMethod::None => {
                let fused = fuse(params, &q_orig.q, &s.objects, mode)?;
                let h = fused.h.clone();
                (None, fused, None, h)
            }
            DebiasMethod::Contrastive => {
                let q_var = encode_question(params, need_variant(s, debias.method)?)?;
                let fused = fuse(params, &q_orig.q, &s.objects, mode)?;
                let fused_var = fuse(params, &q_var.q, &s.objects, mode)?;
                let h = fused.h.clone();
                (Some(q_var), fused, Some(fused_var), h)
            }
            DebiasMethod::Mixing => {
                let q_var = encode_question(params, need_variant(s, debias.method)?)?;
                match debias.mix_level {
                    MixLevel::Question => {
                        let q = mix_features(&q_orig.q, &q_var.q, alpha)?;
                        let fused = fuse(params, &q, &s.objects, mode)?;
                        let h = fused.h.clone();
                        (Some(q_var), fused, None, h)
                    }
                    MixLevel::Fused => {
                        let fused = fuse(params, &q_orig.q, &s.objects, mode)?;
                        let fused_var = fuse(params, &q_var.q, &s.objects, mode)?;
                        let h = mix_features(&fused.h, &fused_var.h, alpha)?;
                        (Some(q_var), fused, Some(fused_var), h)
                    }
                }
            }
        };
        let (q_var, fused, fused_var, h) = step;
        let p = classify(params, &h);
        fwd.push(Forward {
            q_orig,
            q_var,
            fused,
            fused_var,
            h,
            p,
        });
    }

    let ps: Vec<Vec<T>> = fwd.iter().map(|f| f.p.clone()).collect();
    let targets: Vec<Vec<T>> = batch.iter().map(|s| s.target.clone()).collect();
    let ce = ce_loss(&ps, &targets);

    let lambda = T::lit(debias.lambda);
    let con = if debias.method == DebiasMethod::Contrastive && batch.len() >= 2 {
        let anchors: Vec<Vec<T>> = fwd.iter().map(|f| f.fused.h.clone()).collect();
        let positives: Vec<Vec<T>> = fwd
            .iter()
            .map(|f| f.fused_var.as_ref().expect("contrastive forward").h.clone())
            .collect();
        Some(contrastive_loss_with_temperature(
            &ContrastiveBatch {
                anchors: &anchors,
                positives: &positives,
            },
            T::lit(debias.temperature),
        )?)
    } else {
        None
    };

    for (i, f) in fwd.iter().enumerate() {
        let mut dh = classify_backward(params, &f.h, &ce.dlogits[i], grads);
        match debias.method {
            DebiasMethod::None => {
                let dq = fuse_backward(params, &f.fused, &dh, grads);
                encode_question_backward(params, &f.q_orig, &dq, grads);
            }
            DebiasMethod::Contrastive => {
                let q_var = f.q_var.as_ref().expect("variant trace");
                let fused_var = f.fused_var.as_ref().expect("variant fuse");
                let mut dh_var = vec![T::zero(); dh.len()];
                if let Some(c) = &con {
                    for k in 0..dh.len() {
                        dh[k] = dh[k] + lambda * c.d_anchors[i][k];
                        dh_var[k] = lambda * c.d_positives[i][k];
                    }
                }
                let dq = fuse_backward(params, &f.fused, &dh, grads);
                encode_question_backward(params, &f.q_orig, &dq, grads);
                let dqv = fuse_backward(params, fused_var, &dh_var, grads);
                encode_question_backward(params, q_var, &dqv, grads);
            }
            DebiasMethod::Mixing => {
                let q_var = f.q_var.as_ref().expect("variant trace");
                match debias.mix_level {
                    MixLevel::Question => {
                        let dq = fuse_backward(params, &f.fused, &dh, grads);
                        let d_orig: Vec<T> = dq.iter().map(|&x| alpha * x).collect();
                        let d_var: Vec<T> = dq.iter().map(|&x| (one - alpha) * x).collect();
                        encode_question_backward(params, &f.q_orig, &d_orig, grads);
                        encode_question_backward(params, q_var, &d_var, grads);
                    }
                    MixLevel::Fused => {
                        let fused_var = f.fused_var.as_ref().expect("variant fuse");
                        let dh_orig: Vec<T> = dh.iter().map(|&x| alpha * x).collect();
                        let dh_var: Vec<T> = dh.iter().map(|&x| (one - alpha) * x).collect();
                        let dq = fuse_backward(params, &f.fused, &dh_orig, grads);
                        encode_question_backward(params, &f.q_orig, &dq, grads);
                        let dqv = fuse_backward(params, fused_var, &dh_var, grads);
                        encode_question_backward(params, q_var, &dqv, grads);
                    }
                }
            }
        }
    }

    let con_loss = con.map_or(T::zero(), |c| c.loss);
    Ok(LossParts {
        ce: ce.loss,
        con: con_loss,
        total: joint_loss(ce.loss, con_loss, lambda),
    })
}

/// Everything a training run produces.
#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    pub model: Model<T>,
    /// mean batch loss per epoch
    pub loss_log: Vec<f64>,
}

fn vocab_for(cfg: &TrainConfig, train: &[Sample], seed_for: impl Fn(usize) -> u64) -> Vocab {
    let mut words: Vec<String> = Vec::new();
    let epochs = if cfg.variant2_per_epoch { cfg.epochs.max(1) } else { 1 };
    for s in train {
        for e in 0..epochs {
            words.extend(render(cfg.train_input, &s.question, seed_for(e), cfg.max_len));
        }
        if cfg.uses_variant() {
            words.extend(render(
                cfg.debias.variant_kind.into(),
                &s.question,
                seed_for(0),
                cfg.max_len,
            ));
        }
    }
    Vocab::build(words.iter().map(String::as_str).filter(|w| *w != PAD && *w != UNK))
}

fn variant_seed(cfg: &TrainConfig, epoch: usize) -> u64 {
    if cfg.variant2_per_epoch {
        mix64(cfg.seed ^ mix64(epoch as u64 + 0x5EED))
    } else {
        cfg.seed
    }
}

/// Trains on `data.train`. `audit` sees every rendered token sequence that
/// reaches the model, keyed by question id.
pub fn train_with_audit<T: Scalar>(
    cfg: &TrainConfig,
    data: &Dataset,
    audit: &mut dyn FnMut(u64, &[String]),
) -> Result<TrainOutcome<T>> {
    cfg.validate()?;
    if data.train.is_empty() {
        return Err(Error::Config("training split is empty".into()));
    }
    let obj_dim = data.train[0].scene.dim();
    let vocab = vocab_for(cfg, &data.train, |e| variant_seed(cfg, e));
    let mut init_rng = ChaCha8Rng::seed_from_u64(mix64(cfg.seed ^ 0x1417));
    let mut model = Model::<T>::new(
        vocab,
        data.answers.clone(),
        cfg.max_len,
        obj_dim,
        cfg.embed_dim,
        cfg.hidden_dim,
        &mut init_rng,
    );
    model.inference = cfg.inference();

    let objects: Vec<Vec<Vec<T>>> = data.train.iter().map(to_objects).collect();
    let targets: Vec<Vec<T>> = data
        .train
        .iter()
        .map(|s| s.target(&model.answers).into_iter().map(T::lit).collect())
        .collect();

    let prepare = |epoch: usize, audit: &mut dyn FnMut(u64, &[String])| -> Vec<Prepared<T>> {
        let seed = variant_seed(cfg, epoch);
        data.train
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let tokens = render(cfg.train_input, &s.question, seed, cfg.max_len);
                audit(s.question.id, &tokens);
                let variant_ids = cfg.uses_variant().then(|| {
                    let v = render(cfg.debias.variant_kind.into(), &s.question, seed, cfg.max_len);
                    audit(s.question.id, &v);
                    model.vocab.pad(&v, cfg.max_len)
                });
                Prepared {
                    ids: model.vocab.pad(&tokens, cfg.max_len),
                    variant_ids,
                    objects: objects[i].clone(),
                    target: targets[i].clone(),
                }
            })
            .collect()
    };

    let mut prepared = prepare(0, audit);
    let mut adam = Adam::new(
        AdamConfig {
            lr: cfg.lr,
            ..AdamConfig::default()
        },
        &model.config,
    );
    let mut grads = Params::zeros(&model.config);
    let mut loss_log = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        if cfg.variant2_per_epoch && epoch > 0 {
            prepared = prepare(epoch, audit);
        }
        let mut order: Vec<usize> = (0..prepared.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(mix64(cfg.seed ^ mix64(epoch as u64))));
        let mut total = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&Prepared<T>> = chunk.iter().map(|&i| &prepared[i]).collect();
            grads.fill_zero();
            let loss = batch_objective(&model.params, &batch, cfg.model_mode, &cfg.debias, &mut grads)?;
            let l = loss.total.as_f64();
            if !l.is_finite() || !grads.all_finite() {
                return Err(Error::Numeric(format!("non-finite loss or gradient in epoch {epoch}")));
            }
            adam.step(&mut model.params, &grads);
            total += l;
            batches += 1;
        }
        loss_log.push(total / batches as f64);
    }
    if !model.params.all_finite() {
        return Err(Error::Numeric("non-finite parameters after training".into()));
    }
    Ok(TrainOutcome { model, loss_log })
}

pub fn train<T: Scalar>(cfg: &TrainConfig, data: &Dataset) -> Result<TrainOutcome<T>> {
    train_with_audit(cfg, data, &mut |_, _| {})
}

/// Padded ids for `s` under `input`, plus the variant ids a mixing model
/// needs. The mixed-in variant is always taken of the original question.
fn eval_inputs<T: Scalar>(model: &Model<T>, s: &Sample, input: InputMode) -> (Vec<u32>, Option<Vec<u32>>) {
    let len = model.config.max_len;
    let seed = model.inference.mix.as_ref().map_or(0, |m| m.seed);
    let ids = model.vocab.pad(&render(input, &s.question, seed, len), len);
    let variant_ids = model.inference.mix.as_ref().map(|m| {
        let v = render(m.variant_kind.into(), &s.question, m.seed, len);
        model.vocab.pad(&v, len)
    });
    (ids, variant_ids)
}

/// Forward pass of `model` on one sample under `input`.
pub fn encode_sample<T: Scalar>(model: &Model<T>, s: &Sample, input: InputMode) -> Result<Encodings<T>> {
    let (ids, variant_ids) = eval_inputs(model, s, input);
    model.infer(&ids, variant_ids.as_deref(), &to_objects(s))
}

pub fn evaluate<T: Scalar>(
    model: &Model<T>,
    samples: &[Sample],
    input: InputMode,
) -> Result<Vec<PredictionRecord>> {
    samples
        .iter()
        .map(|s| {
            let enc = encode_sample(model, s, input)?;
            let pred = model.answers[predict(&enc.p)].clone();
            Ok(PredictionRecord::new(
                s.question.id,
                pred,
                s.answer.clone(),
                s.question.qtype_label().to_string(),
                s.question.answer_type,
            ))
        })
        .collect()
}

/// For each token of `render(input, q, ..)`, whether it is a question-type
/// word of `q`.
pub fn prefix_flags(input: InputMode, q: &Question, seed: u64, max_len: usize) -> Vec<bool> {
    // render a copy whose words are their own indices and read them back
    let mut indexed = q.clone();
    indexed.tokens = (0..q.tokens.len()).map(|i| i.to_string()).collect();
    let k = q.prefix().len();
    render(input, &indexed, seed, max_len)
        .iter()
        .map(|t| t.parse::<usize>().is_ok_and(|i| i < k))
        .collect()
}

/// Mean share of token attention that lands on question-type words, with
/// every question rendered the way `input` renders it.
pub fn prefix_attention_mass<T: Scalar>(
    model: &Model<T>,
    samples: &[Sample],
    input: InputMode,
) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Config("no samples".into()));
    }
    let seed = model.inference.mix.as_ref().map_or(0, |m| m.seed);
    let mut total = 0.0;
    for s in samples {
        let enc = encode_sample(model, s, input)?;
        let flags = prefix_flags(input, &s.question, seed, model.config.max_len);
        total += enc
            .token_positions
            .iter()
            .zip(&enc.token_attn)
            .filter(|(&pos, _)| flags.get(pos).copied().unwrap_or(false))
            .map(|(_, a)| a.as_f64())
            .sum::<f64>();
    }
    Ok(total / samples.len() as f64)
}

/// Question encodings (before any mixing) of every sample under `input`.
pub fn question_encodings<T: Scalar>(
    model: &Model<T>,
    samples: &[Sample],
    input: InputMode,
) -> Result<Vec<Vec<T>>> {
    let seed = model.inference.mix.as_ref().map_or(0, |m| m.seed);
    let len = model.config.max_len;
    samples
        .iter()
        .map(|s| {
            let ids = model.vocab.pad(&render(input, &s.question, seed, len), len);
            encode_question(&model.params, &ids).map(|t| t.q)
        })
        .collect()
}

/// Word attention for one question, as fed in its original form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionExample {
    pub question_id: u64,
    pub question: String,
    pub qtype: String,
    pub weights: Vec<(String, f64)>,
}

/// Encoder diagnostics of one trained model on one split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Analysis {
    pub split: Split,
    pub prefix_attention: f64,
    /// `simi` between original and variant encodings, per variant
    pub simi: Vec<(VariantKind, f64)>,
    pub examples: Vec<AttentionExample>,
}

/// Prefix attention mass, `simi` for the three variants and word-attention
/// examples for the first question of each question type.
pub fn analyze<T: Scalar>(model: &Model<T>, samples: &[Sample], split: Split) -> Result<Analysis> {
    let prefix_attention = prefix_attention_mass(model, samples, InputMode::Question)?;
    let orig = question_encodings(model, samples, InputMode::Question)?;
    let simi = [VariantKind::Variant1, VariantKind::Variant2, VariantKind::Variant3]
        .into_iter()
        .map(|k| {
            let var = question_encodings(model, samples, k.into())?;
            Ok((k, crate::metrics::simi(&orig, &var)?.as_f64()))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut seen = std::collections::BTreeSet::new();
    let mut examples = Vec::new();
    for s in samples {
        if seen.insert(s.question.qtype_label().to_string()) {
            examples.push(AttentionExample {
                question_id: s.question.id,
                question: s.question.render(),
                qtype: s.question.qtype_label().to_string(),
                weights: attention_for(model, s)?
                    .into_iter()
                    .map(|(w, a)| (w, a.as_f64()))
                    .collect(),
            });
        }
    }
    Ok(Analysis {
        split,
        prefix_attention,
        simi,
        examples,
    })
}

/// Per-word attention of `model` for a question text (the payload behind
/// word-attention heat maps).
pub fn attention_for<T: Scalar>(model: &Model<T>, s: &Sample) -> Result<Vec<(String, T)>> {
    let enc = encode_sample(model, s, InputMode::Question)?;
    Ok(crate::model::dump_attention(&enc, &s.question.tokens))
}

/// Training run driven entirely by files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub name: String,
    pub data_dir: PathBuf,
    pub out_dir: PathBuf,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default = "default_eval_inputs")]
    pub eval_inputs: Vec<InputMode>,
    #[serde(default = "default_eval_splits")]
    pub eval_splits: Vec<Split>,
}

pub fn default_eval_inputs() -> Vec<InputMode> {
    vec![InputMode::Question]
}

pub fn default_eval_splits() -> Vec<Split> {
    vec![Split::TestId, Split::TestOod]
}

pub fn prediction_file(input: InputMode, split: Split) -> String {
    format!("pred_{input}_{split}.jsonl")
}

/// Trains, writes `model.json` and `loss.json`, then writes one prediction
/// dump per requested evaluation input and split.
pub fn run(cfg: &RunConfig, data: &Dataset) -> Result<TrainOutcome<f64>> {
    let outcome = train::<f64>(&cfg.train, data)?;
    write_outputs(cfg, data, &outcome)?;
    Ok(outcome)
}

pub fn write_outputs(cfg: &RunConfig, data: &Dataset, outcome: &TrainOutcome<f64>) -> Result<()> {
    outcome.model.save(&cfg.out_dir.join("model.json"))?;
    io::write_json(&cfg.out_dir.join("loss.json"), &outcome.loss_log)?;
    for &split in &cfg.eval_splits {
        for &input in &cfg.eval_inputs {
            let records = evaluate(&outcome.model, data.split(split), input)?;
            io::write_jsonl(&cfg.out_dir.join(prediction_file(input, split)), &records)?;
        }
    }
    Ok(())
}

pub fn load_run_config(path: &Path) -> Result<RunConfig> {
    crate::config::load(path)
}
