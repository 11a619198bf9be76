//! Miniature VQA classifier with hand-written backpropagation.
//!
//! The forward graph is split into three stages so that debiasing objectives
//! can recombine them:
//!
//! 1. [`encode_question`]: attention-pooled token + position embeddings → `q`
//! 2. [`fuse`]: question-guided object attention, `h = tanh(F(q ⊙ (P v̄ + c)) + f)`
//!    (or `h = tanh(F q + f)` for the question-only ablation)
//! 3. [`classify`]: `p = softmax(W h + b)`
//!
//! Each stage has a matching backward function that accumulates parameter
//! gradients and returns the gradient with respect to its input.

mod adam;
mod checkpoint;
mod tensor;

pub use adam::{Adam, AdamConfig};
pub use checkpoint::{CheckpointFile, TensorRecord, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use tensor::Tensor;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::debias::MixLevel;
use crate::error::{Error, Result};
use crate::perturb::VariantKind;
use crate::question::{Vocab, PAD_ID};
use crate::scalar::{dot, masked_softmax, softmax, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ModelMode {
    #[default]
    Full,
    QOnly,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub max_len: usize,
    pub obj_dim: usize,
    pub num_answers: usize,
    pub embed_dim: usize,
    pub hidden_dim: usize,
}

/// How a trained model turns a question into a prediction: the model mode
/// and, for feature-mixing models, how the variant encoding is blended in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct InferenceSpec {
    pub mode: ModelMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mix: Option<MixSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixSpec {
    pub alpha: f64,
    pub variant_kind: VariantKind,
    pub level: MixLevel,
    pub seed: u64,
}

pub const INIT_RANGE: f64 = 0.08;

/// All learnable tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct Params<T> {
    /// word embeddings, `|V| × d`
    pub emb: Tensor<T>,
    /// position embeddings, `L × d`
    pub pos: Tensor<T>,
    /// token-attention vector `u`
    pub attn_u: Tensor<T>,
    pub attn_b: Tensor<T>,
    /// question→object attention map, `d × D_v`
    pub obj_map: Tensor<T>,
    /// object projection, `d × D_v`
    pub obj_proj: Tensor<T>,
    pub obj_proj_b: Tensor<T>,
    /// fusion layer, `d_h × d`
    pub fusion: Tensor<T>,
    pub fusion_b: Tensor<T>,
    /// classifier `W`, `|A| × d_h`
    pub cls: Tensor<T>,
    /// classifier bias `b`
    pub cls_b: Tensor<T>,
}

pub const TENSOR_NAMES: [&str; 11] = [
    "emb",
    "pos",
    "attn_u",
    "attn_b",
    "obj_map",
    "obj_proj",
    "obj_proj_b",
    "fusion",
    "fusion_b",
    "cls",
    "cls_b",
];

impl<T: Scalar> Params<T> {
    pub fn zeros(cfg: &ModelConfig) -> Self {
        let (d, dv, dh, a) = (cfg.embed_dim, cfg.obj_dim, cfg.hidden_dim, cfg.num_answers);
        Self {
            emb: Tensor::zeros(&[cfg.vocab_size, d]),
            pos: Tensor::zeros(&[cfg.max_len, d]),
            attn_u: Tensor::zeros(&[d]),
            attn_b: Tensor::zeros(&[1]),
            obj_map: Tensor::zeros(&[d, dv]),
            obj_proj: Tensor::zeros(&[d, dv]),
            obj_proj_b: Tensor::zeros(&[d]),
            fusion: Tensor::zeros(&[dh, d]),
            fusion_b: Tensor::zeros(&[dh]),
            cls: Tensor::zeros(&[a, dh]),
            cls_b: Tensor::zeros(&[a]),
        }
    }

    /// Weights uniform in `±INIT_RANGE`, biases zero.
    pub fn init(cfg: &ModelConfig, rng: &mut impl Rng) -> Self {
        let mut p = Self::zeros(cfg);
        let mut weight = |t: &mut Tensor<T>| {
            for x in &mut t.data {
                *x = T::lit(rng.random_range(-INIT_RANGE..INIT_RANGE));
            }
        };
        weight(&mut p.emb);
        weight(&mut p.pos);
        weight(&mut p.attn_u);
        weight(&mut p.obj_map);
        weight(&mut p.obj_proj);
        weight(&mut p.fusion);
        weight(&mut p.cls);
        p
    }

    pub fn tensors(&self) -> [(&'static str, &Tensor<T>); 11] {
        [
            ("emb", &self.emb),
            ("pos", &self.pos),
            ("attn_u", &self.attn_u),
            ("attn_b", &self.attn_b),
            ("obj_map", &self.obj_map),
            ("obj_proj", &self.obj_proj),
            ("obj_proj_b", &self.obj_proj_b),
            ("fusion", &self.fusion),
            ("fusion_b", &self.fusion_b),
            ("cls", &self.cls),
            ("cls_b", &self.cls_b),
        ]
    }

    pub fn tensors_mut(&mut self) -> [(&'static str, &mut Tensor<T>); 11] {
        [
            ("emb", &mut self.emb),
            ("pos", &mut self.pos),
            ("attn_u", &mut self.attn_u),
            ("attn_b", &mut self.attn_b),
            ("obj_map", &mut self.obj_map),
            ("obj_proj", &mut self.obj_proj),
            ("obj_proj_b", &mut self.obj_proj_b),
            ("fusion", &mut self.fusion),
            ("fusion_b", &mut self.fusion_b),
            ("cls", &mut self.cls),
            ("cls_b", &mut self.cls_b),
        ]
    }

    pub fn fill_zero(&mut self) {
        for (_, t) in self.tensors_mut() {
            t.fill_zero();
        }
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().iter().all(|(_, t)| t.all_finite())
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    /// Scales every entry (used for gradient averaging).
    pub fn scale(&mut self, by: T) {
        for (_, t) in self.tensors_mut() {
            t.data.iter_mut().for_each(|x| *x = *x * by);
        }
    }
}

/// A trained or freshly initialised classifier together with the
/// vocabularies its tensors are indexed by.
#[derive(Debug, Clone, PartialEq)]
pub struct Model<T> {
    pub config: ModelConfig,
    pub vocab: Vocab,
    pub answers: Vec<String>,
    pub inference: InferenceSpec,
    pub params: Params<T>,
}

impl<T: Scalar> Model<T> {
    pub fn new(
        vocab: Vocab,
        answers: Vec<String>,
        max_len: usize,
        obj_dim: usize,
        embed_dim: usize,
        hidden_dim: usize,
        rng: &mut impl Rng,
    ) -> Self {
        let config = ModelConfig {
            vocab_size: vocab.len(),
            max_len,
            obj_dim,
            num_answers: answers.len(),
            embed_dim,
            hidden_dim,
        };
        let params = Params::init(&config, rng);
        Self {
            config,
            vocab,
            answers,
            inference: InferenceSpec::default(),
            params,
        }
    }

    pub fn answer_index(&self, answer: &str) -> Option<usize> {
        self.answers.iter().position(|a| a == answer)
    }

    /// Forward pass following [`Self::inference`]. `variant_ids` must be
    /// given when the model mixes in a variant encoding.
    pub fn infer(&self, ids: &[u32], variant_ids: Option<&[u32]>, objects: &[Vec<T>]) -> Result<Encodings<T>> {
        let Some(mix) = &self.inference.mix else {
            return self.forward(ids, objects, self.inference.mode);
        };
        let variant_ids =
            variant_ids.ok_or_else(|| Error::Model("mixing model needs the variant question".into()))?;
        let mode = self.inference.mode;
        let alpha = T::lit(mix.alpha);
        let qt = encode_question(&self.params, ids)?;
        let qv = encode_question(&self.params, variant_ids)?;
        let (q_enc, ft, h) = match mix.level {
            MixLevel::Question => {
                let q = crate::debias::mix_features(&qt.q, &qv.q, alpha)?;
                let ft = fuse(&self.params, &q, objects, mode)?;
                let h = ft.h.clone();
                (q, ft, h)
            }
            MixLevel::Fused => {
                let ft = fuse(&self.params, &qt.q, objects, mode)?;
                let fv = fuse(&self.params, &qv.q, objects, mode)?;
                let h = crate::debias::mix_features(&ft.h, &fv.h, alpha)?;
                (qt.q.clone(), ft, h)
            }
        };
        let p = classify(&self.params, &h);
        Ok(Encodings {
            q_enc,
            token_attn: qt.attn,
            token_positions: qt.positions,
            obj_attn: ft.obj_attn,
            h,
            p,
        })
    }

    /// Full forward pass on padded ids and object features.
    pub fn forward(&self, ids: &[u32], objects: &[Vec<T>], mode: ModelMode) -> Result<Encodings<T>> {
        let qt = encode_question(&self.params, ids)?;
        let ft = fuse(&self.params, &qt.q, objects, mode)?;
        let p = classify(&self.params, &ft.h);
        Ok(Encodings {
            q_enc: qt.q.clone(),
            token_attn: qt.attn.clone(),
            token_positions: qt.positions.clone(),
            obj_attn: ft.obj_attn.clone(),
            h: ft.h.clone(),
            p,
        })
    }
}

/// Everything a forward pass exposes for analysis.
#[derive(Debug, Clone, PartialEq)]
pub struct Encodings<T> {
    pub q_enc: Vec<T>,
    /// attention over the non-pad positions listed in `token_positions`
    pub token_attn: Vec<T>,
    pub token_positions: Vec<usize>,
    pub obj_attn: Vec<T>,
    pub h: Vec<T>,
    pub p: Vec<T>,
}

/// Cached activations of the question encoder.
#[derive(Debug, Clone)]
pub struct QuestionTrace<T> {
    pub ids: Vec<u32>,
    /// non-pad positions
    pub positions: Vec<usize>,
    /// `E[id] + P[pos]` per non-pad position
    pub e: Vec<Vec<T>>,
    /// `tanh(e)`
    pub z: Vec<Vec<T>>,
    pub attn: Vec<T>,
    pub q: Vec<T>,
}

pub fn encode_question<T: Scalar>(params: &Params<T>, ids: &[u32]) -> Result<QuestionTrace<T>> {
    let max_len = params.pos.rows();
    let vocab = params.emb.rows();
    if ids.len() != max_len {
        return Err(Error::Model(format!(
            "question has {} ids, model expects {max_len}",
            ids.len()
        )));
    }
    if let Some(&bad) = ids.iter().find(|&&id| id as usize >= vocab) {
        return Err(Error::Model(format!("token id {bad} outside vocabulary of {vocab}")));
    }
    let positions: Vec<usize> = (0..ids.len()).filter(|&i| ids[i] != PAD_ID).collect();
    if positions.is_empty() {
        return Err(Error::Model("question has no non-pad token".into()));
    }
    let u = &params.attn_u.data;
    let b = params.attn_b.data[0];
    let mut e = Vec::with_capacity(positions.len());
    let mut z = Vec::with_capacity(positions.len());
    let mut attn = Vec::with_capacity(positions.len());
    for &t in &positions {
        let et: Vec<T> = params
            .emb
            .row(ids[t] as usize)
            .iter()
            .zip(params.pos.row(t))
            .map(|(&a, &p)| a + p)
            .collect();
        let zt: Vec<T> = et.iter().map(|x| x.tanh()).collect();
        attn.push(dot(u, &zt) + b);
        e.push(et);
        z.push(zt);
    }
    softmax(&mut attn);
    let d = params.emb.cols();
    let mut q = vec![T::zero(); d];
    for (a, et) in attn.iter().zip(&e) {
        for (qi, &x) in q.iter_mut().zip(et) {
            *qi = *qi + *a * x;
        }
    }
    Ok(QuestionTrace {
        ids: ids.to_vec(),
        positions,
        e,
        z,
        attn,
        q,
    })
}

pub fn encode_question_backward<T: Scalar>(
    params: &Params<T>,
    trace: &QuestionTrace<T>,
    dq: &[T],
    grads: &mut Params<T>,
) {
    let u = &params.attn_u.data;
    let dalpha: Vec<T> = trace.e.iter().map(|et| dot(dq, et)).collect();
    let mean = dot(&trace.attn, &dalpha);
    for (k, &t) in trace.positions.iter().enumerate() {
        let a = trace.attn[k];
        let dscore = a * (dalpha[k] - mean);
        grads.attn_b.data[0] = grads.attn_b.data[0] + dscore;
        let zt = &trace.z[k];
        for (g, &zi) in grads.attn_u.data.iter_mut().zip(zt) {
            *g = *g + dscore * zi;
        }
        let de: Vec<T> = (0..dq.len())
            .map(|i| a * dq[i] + dscore * u[i] * (T::one() - zt[i] * zt[i]))
            .collect();
        let id = trace.ids[t] as usize;
        for (g, &x) in grads.emb.row_mut(id).iter_mut().zip(&de) {
            *g = *g + x;
        }
        for (g, &x) in grads.pos.row_mut(t).iter_mut().zip(&de) {
            *g = *g + x;
        }
    }
}

/// Cached activations of the fusion stage.
#[derive(Debug, Clone)]
pub struct FuseTrace<T> {
    pub mode: ModelMode,
    pub q: Vec<T>,
    pub objects: Vec<Vec<T>>,
    pub obj_attn: Vec<T>,
    pub v_bar: Vec<T>,
    /// projected scene encoding
    pub s: Vec<T>,
    /// fusion input
    pub g: Vec<T>,
    pub h: Vec<T>,
}

pub fn fuse<T: Scalar>(
    params: &Params<T>,
    q: &[T],
    objects: &[Vec<T>],
    mode: ModelMode,
) -> Result<FuseTrace<T>> {
    let d = params.emb.cols();
    let dv = params.obj_map.cols();
    if q.len() != d {
        return Err(Error::Model(format!("question encoding has dimension {}, expected {d}", q.len())));
    }
    let (obj_attn, v_bar, s, g) = match mode {
        ModelMode::QOnly => (Vec::new(), Vec::new(), Vec::new(), q.to_vec()),
        ModelMode::Full => {
            if objects.is_empty() {
                return Err(Error::Model("scene has no objects".into()));
            }
            if let Some(bad) = objects.iter().find(|o| o.len() != dv) {
                return Err(Error::Model(format!(
                    "object feature has dimension {}, expected {dv}",
                    bad.len()
                )));
            }
            let mut w = vec![T::zero(); dv];
            params.obj_map.matvec_t_add(q, &mut w);
            let mut beta: Vec<T> = objects.iter().map(|o| dot(&w, o)).collect();
            masked_softmax(&mut beta, |_| true);
            let mut v_bar = vec![T::zero(); dv];
            for (b, o) in beta.iter().zip(objects) {
                for (vb, &x) in v_bar.iter_mut().zip(o) {
                    *vb = *vb + *b * x;
                }
            }
            let mut s = vec![T::zero(); d];
            params.obj_proj.matvec(&v_bar, &mut s);
            for (si, &bi) in s.iter_mut().zip(&params.obj_proj_b.data) {
                *si = *si + bi;
            }
            let g = q.iter().zip(&s).map(|(&a, &b)| a * b).collect();
            (beta, v_bar, s, g)
        }
    };
    let mut h = vec![T::zero(); params.fusion.rows()];
    params.fusion.matvec(&g, &mut h);
    for (hi, &bi) in h.iter_mut().zip(&params.fusion_b.data) {
        *hi = (*hi + bi).tanh();
    }
    Ok(FuseTrace {
        mode,
        q: q.to_vec(),
        objects: if mode == ModelMode::Full {
            objects.to_vec()
        } else {
            Vec::new()
        },
        obj_attn,
        v_bar,
        s,
        g,
        h,
    })
}

/// Backward through [`fuse`]; returns `∂L/∂q`.
pub fn fuse_backward<T: Scalar>(
    params: &Params<T>,
    trace: &FuseTrace<T>,
    dh: &[T],
    grads: &mut Params<T>,
) -> Vec<T> {
    let da: Vec<T> = dh
        .iter()
        .zip(&trace.h)
        .map(|(&g, &h)| g * (T::one() - h * h))
        .collect();
    grads.fusion.add_outer(&da, &trace.g);
    grads.fusion_b.add_vec(&da);
    let mut dg = vec![T::zero(); trace.g.len()];
    params.fusion.matvec_t_add(&da, &mut dg);
    match trace.mode {
        ModelMode::QOnly => dg,
        ModelMode::Full => {
            let mut dq: Vec<T> = dg.iter().zip(&trace.s).map(|(&a, &b)| a * b).collect();
            let ds: Vec<T> = dg.iter().zip(&trace.q).map(|(&a, &b)| a * b).collect();
            grads.obj_proj.add_outer(&ds, &trace.v_bar);
            grads.obj_proj_b.add_vec(&ds);
            let mut dv_bar = vec![T::zero(); trace.v_bar.len()];
            params.obj_proj.matvec_t_add(&ds, &mut dv_bar);
            let dbeta: Vec<T> = trace.objects.iter().map(|o| dot(&dv_bar, o)).collect();
            let mean = dot(&trace.obj_attn, &dbeta);
            let mut dw = vec![T::zero(); dv_bar.len()];
            for ((&b, &db), o) in trace.obj_attn.iter().zip(&dbeta).zip(&trace.objects) {
                let dr = b * (db - mean);
                for (w, &x) in dw.iter_mut().zip(o) {
                    *w = *w + dr * x;
                }
            }
            grads.obj_map.add_outer(&trace.q, &dw);
            params.obj_map.matvec(&dw, &mut dg);
            for (a, &b) in dq.iter_mut().zip(&dg) {
                *a = *a + b;
            }
            dq
        }
    }
}

/// `softmax(W h + b)`.
pub fn classify<T: Scalar>(params: &Params<T>, h: &[T]) -> Vec<T> {
    let mut logits = vec![T::zero(); params.cls.rows()];
    params.cls.matvec(h, &mut logits);
    for (l, &b) in logits.iter_mut().zip(&params.cls_b.data) {
        *l = *l + b;
    }
    softmax(&mut logits);
    logits
}

/// Backward through [`classify`] given `∂L/∂logits`; returns `∂L/∂h`.
pub fn classify_backward<T: Scalar>(
    params: &Params<T>,
    h: &[T],
    dlogits: &[T],
    grads: &mut Params<T>,
) -> Vec<T> {
    grads.cls.add_outer(dlogits, h);
    grads.cls_b.add_vec(dlogits);
    let mut dh = vec![T::zero(); h.len()];
    params.cls.matvec_t_add(dlogits, &mut dh);
    dh
}

/// Index of the largest probability; ties go to the lowest index.
pub fn predict<T: Scalar>(p: &[T]) -> usize {
    let mut best = 0;
    for (i, &x) in p.iter().enumerate() {
        if x > p[best] {
            best = i;
        }
    }
    best
}

pub const LOG_CLAMP: f64 = 1e-12;

/// Mean cross-entropy of a batch and its gradient with respect to each
/// sample's logits.
#[derive(Debug, Clone)]
pub struct CeLoss<T> {
    pub loss: T,
    pub dlogits: Vec<Vec<T>>,
}

pub fn ce_loss<T: Scalar>(ps: &[Vec<T>], targets: &[Vec<T>]) -> CeLoss<T> {
    let n = T::lit(ps.len().max(1) as f64);
    let clamp = T::lit(LOG_CLAMP);
    let mut loss = T::zero();
    let mut dlogits = Vec::with_capacity(ps.len());
    for (p, a) in ps.iter().zip(targets) {
        let mass: T = a.iter().copied().sum();
        for (&pi, &ai) in p.iter().zip(a) {
            if ai != T::zero() {
                loss = loss - ai * pi.max(clamp).ln();
            }
        }
        dlogits.push(p.iter().zip(a).map(|(&pi, &ai)| (pi * mass - ai) / n).collect());
    }
    CeLoss {
        loss: loss / n,
        dlogits,
    }
}

/// Per-word attention for the non-pad positions of a forward pass,
/// renormalised to sum to one.
pub fn dump_attention<T: Scalar>(enc: &Encodings<T>, words: &[String]) -> Vec<(String, T)> {
    let total: T = enc.token_attn.iter().copied().sum();
    enc.token_positions
        .iter()
        .zip(&enc.token_attn)
        .map(|(&pos, &w)| {
            let word = words.get(pos).cloned().unwrap_or_default();
            (word, w / total)
        })
        .collect()
}
