//! Variant-question debiasing: a contrastive objective that treats the
//! variant question's fused feature as the positive for its original, and a
//! convex mixing of original and variant question encodings.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::perturb::VariantKind;
use crate::scalar::{dot, norm, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum DebiasMethod {
    #[default]
    None,
    Contrastive,
    Mixing,
}

impl fmt::Display for DebiasMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DebiasMethod::None => "none",
            DebiasMethod::Contrastive => "contrastive",
            DebiasMethod::Mixing => "mixing",
        })
    }
}

impl FromStr for DebiasMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(DebiasMethod::None),
            "contrastive" => Ok(DebiasMethod::Contrastive),
            "mixing" => Ok(DebiasMethod::Mixing),
            other => Err(Error::Config(format!("unknown debias method {other:?}"))),
        }
    }
}

/// Where mixed features are formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum MixLevel {
    #[default]
    Question,
    Fused,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DebiasConfig {
    pub method: DebiasMethod,
    pub lambda: f64,
    pub alpha: f64,
    pub variant_kind: VariantKind,
    pub mix_level: MixLevel,
    /// Divides similarities before the softmax; 1 means none.
    pub temperature: f64,
}

impl Default for DebiasConfig {
    fn default() -> Self {
        Self {
            method: DebiasMethod::None,
            lambda: 1.0,
            alpha: 0.5,
            variant_kind: VariantKind::Variant1,
            mix_level: MixLevel::Question,
            temperature: 1.0,
        }
    }
}

impl DebiasConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) {
            return Err(Error::Config(format!("debias.lambda {} must be >= 0", self.lambda)));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Config(format!("debias.alpha {} must be in [0, 1]", self.alpha)));
        }
        if !(self.temperature > 0.0) {
            return Err(Error::Config(format!(
                "debias.temperature {} must be positive",
                self.temperature
            )));
        }
        Ok(())
    }
}

pub fn cosine_sim<T: Scalar>(x: &[T], y: &[T]) -> Result<T> {
    if x.len() != y.len() {
        return Err(Error::Sim(format!("dimension mismatch {} vs {}", x.len(), y.len())));
    }
    let (nx, ny) = (norm(x), norm(y));
    if nx == T::zero() || ny == T::zero() {
        return Err(Error::Sim("zero vector".into()));
    }
    let c = dot(x, y) / (nx * ny);
    Ok(c.max(-T::one()).min(T::one()))
}

/// Accumulates `∂cos(x, y)/∂x · scale` into `out`.
fn unit<T: Scalar>(x: &[T]) -> (Vec<T>, T) {
    let n = norm(x);
    (x.iter().map(|&v| v / n).collect(), n)
}

/// Pulls a gradient taken with respect to `x / |x|` back to `x`.
fn unit_backward<T: Scalar>(g: &[T], unit: &[T], n: T) -> Vec<T> {
    let along = dot(g, unit);
    g.iter().zip(unit).map(|(&gi, &ui)| (gi - along * ui) / n).collect()
}

/// Anchors and their index-aligned positives. Negatives for anchor `i` are
/// all other anchors.
#[derive(Debug, Clone)]
pub struct ContrastiveBatch<'a, T> {
    pub anchors: &'a [Vec<T>],
    pub positives: &'a [Vec<T>],
}

#[derive(Debug, Clone)]
pub struct ContrastiveLoss<T> {
    pub loss: T,
    pub d_anchors: Vec<Vec<T>>,
    pub d_positives: Vec<Vec<T>>,
}

/// `-(1/N) Σ log(e^{sim(h,h⁺)} / (e^{sim(h,h⁺)} + Σ e^{sim(h,h⁻)}))` with
/// gradients for every anchor and positive.
pub fn contrastive_loss<T: Scalar>(batch: &ContrastiveBatch<'_, T>) -> Result<ContrastiveLoss<T>> {
    contrastive_loss_with_temperature(batch, T::one())
}

pub fn contrastive_loss_with_temperature<T: Scalar>(
    batch: &ContrastiveBatch<'_, T>,
    temperature: T,
) -> Result<ContrastiveLoss<T>> {
    let n = batch.anchors.len();
    if n < 2 {
        return Err(Error::Batch(format!("contrastive loss needs at least 2 anchors, got {n}")));
    }
    if batch.positives.len() != n {
        return Err(Error::Batch(format!(
            "{} positives for {n} anchors",
            batch.positives.len()
        )));
    }
    let dim = batch.anchors[0].len();
    for v in batch.anchors.iter().chain(batch.positives) {
        if v.len() != dim {
            return Err(Error::Batch("feature dimension mismatch".into()));
        }
        if norm(v) == T::zero() {
            return Err(Error::Sim("zero feature vector in contrastive batch".into()));
        }
    }
    let inv_n = T::one() / T::lit(n as f64);
    let (ua, na): (Vec<Vec<T>>, Vec<T>) = batch.anchors.iter().map(|v| unit(v)).unzip();
    let (up, np): (Vec<Vec<T>>, Vec<T>) = batch.positives.iter().map(|v| unit(v)).unzip();
    let clamp = |c: T| c.max(-T::one()).min(T::one());
    // gradients with respect to the unit vectors first
    let mut g_a = vec![vec![T::zero(); dim]; n];
    let mut g_p = vec![vec![T::zero(); dim]; n];
    let mut loss = T::zero();
    let mut logits = Vec::with_capacity(n);
    for i in 0..n {
        // candidate i is the positive; every other j is the negative anchor j
        logits.clear();
        for j in 0..n {
            let other = if j == i { &up[i] } else { &ua[j] };
            logits.push(clamp(dot(&ua[i], other)) / temperature);
        }
        let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
        let sum: T = logits.iter().map(|&l| (l - max).exp()).sum();
        let lse = max + sum.ln();
        loss = loss + (lse - logits[i]);
        for j in 0..n {
            // ∂loss_i/∂logit_j = softmax_j - [j is the positive]
            let mut s = (logits[j] - lse).exp();
            if j == i {
                s = s - T::one();
            }
            let s = s * inv_n / temperature;
            let other = if j == i { &up[i] } else { &ua[j] };
            for k in 0..dim {
                g_a[i][k] = g_a[i][k] + s * other[k];
            }
            let target = if j == i { &mut g_p[i] } else { &mut g_a[j] };
            for k in 0..dim {
                target[k] = target[k] + s * ua[i][k];
            }
        }
    }
    let d_anchors = (0..n).map(|i| unit_backward(&g_a[i], &ua[i], na[i])).collect();
    let d_positives = (0..n).map(|i| unit_backward(&g_p[i], &up[i], np[i])).collect();
    Ok(ContrastiveLoss {
        loss: loss * inv_n,
        d_anchors,
        d_positives,
    })
}

pub fn joint_loss<T: Scalar>(ce: T, con: T, lambda: T) -> T {
    ce + lambda * con
}

/// `α·orig + (1−α)·variant`.
pub fn mix_features<T: Scalar>(orig: &[T], variant: &[T], alpha: T) -> Result<Vec<T>> {
    if orig.len() != variant.len() {
        return Err(Error::Model(format!(
            "cannot mix encodings of dimension {} and {}",
            orig.len(),
            variant.len()
        )));
    }
    Ok(orig
        .iter()
        .zip(variant)
        .map(|(&o, &v)| alpha * o + (T::one() - alpha) * v)
        .collect())
}
