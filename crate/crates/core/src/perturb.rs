//! Word-order variants of a question.
//!
//! All operators permute tokens only; none inserts or drops a word. The
//! shuffle variant draws from a stream keyed on `(seed, question_id)`, so the
//! result for one question never depends on which other questions were
//! processed or in what order.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::question::Question;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VariantKind {
    /// Returns the tokens untouched. Only useful for exercising plumbing.
    Identity,
    /// postfix ++ prefix
    Variant1,
    /// uniform shuffle
    Variant2,
    /// reversed word order
    Variant3,
}

impl fmt::Display for VariantKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VariantKind::Identity => "identity",
            VariantKind::Variant1 => "variant1",
            VariantKind::Variant2 => "variant2",
            VariantKind::Variant3 => "variant3",
        })
    }
}

impl FromStr for VariantKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "0" | "identity" => Ok(VariantKind::Identity),
            "1" | "variant1" => Ok(VariantKind::Variant1),
            "2" | "variant2" => Ok(VariantKind::Variant2),
            "3" | "variant3" => Ok(VariantKind::Variant3),
            other => Err(Error::Config(format!("unknown variant {other:?}"))),
        }
    }
}

/// Seed material for the shuffle variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PerturbSeed {
    pub seed: u64,
    pub question_id: u64,
}

impl PerturbSeed {
    pub fn new(seed: u64, question_id: u64) -> Self {
        Self { seed, question_id }
    }

    /// Per-question stream seed.
    pub fn stream(&self) -> u64 {
        mix64(self.seed ^ mix64(self.question_id.wrapping_add(0x9E37_79B9_7F4A_7C15)))
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.stream())
    }
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn variant1(q: &Question) -> Vec<String> {
    if q.qtype.is_none() {
        return q.tokens.clone();
    }
    q.postfix().iter().chain(q.prefix()).cloned().collect()
}

pub fn variant2(q: &Question, seed: PerturbSeed) -> Vec<String> {
    let mut tokens = q.tokens.clone();
    tokens.shuffle(&mut seed.rng());
    tokens
}

pub fn variant3(q: &Question) -> Vec<String> {
    q.tokens.iter().rev().cloned().collect()
}

/// Applies `kind` to `q`; `seed` is only consulted by [`VariantKind::Variant2`].
pub fn apply(kind: VariantKind, q: &Question, seed: u64) -> Vec<String> {
    match kind {
        VariantKind::Identity => q.tokens.clone(),
        VariantKind::Variant1 => variant1(q),
        VariantKind::Variant2 => variant2(q, PerturbSeed::new(seed, q.id)),
        VariantKind::Variant3 => variant3(q),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::question::{AnswerType, QTypeLexicon};

    fn lex() -> QTypeLexicon {
        QTypeLexicon::from_phrases([
            ("what color is", AnswerType::Other),
            ("is there", AnswerType::YesNo),
        ])
        .unwrap()
    }

    fn q(text: &str) -> Question {
        Question::parse(3, text, &lex(), None, None).unwrap()
    }

    fn text(tokens: &[String]) -> String {
        tokens.join(" ")
    }

    #[test]
    fn variant1_swaps_prefix_and_postfix() {
        let flower = q("what color is the flower?");
        assert_eq!(text(&variant1(&flower)), "the flower what color is");
        assert_eq!(text(&variant1(&q("is there?"))), "is there");
        assert_eq!(text(&variant1(&q("hello world"))), "hello world");
    }

    #[test]
    fn variant1_twice_restores_without_redecomposition() {
        let flower = q("what color is the flower?");
        let once = variant1(&flower);
        // swap back using the original split point
        let k = flower.postfix().len();
        let back: Vec<String> = once[k..].iter().chain(&once[..k]).cloned().collect();
        assert_eq!(back, flower.tokens);
    }

    #[test]
    fn variant3_reverses() {
        let flower = q("what color is the flower?");
        assert_eq!(text(&variant3(&flower)), "flower the is color what");
        let pal = q("a b a");
        assert_eq!(variant3(&pal), pal.tokens);
    }

    #[test]
    fn variant2_is_deterministic_and_keyed_per_question() {
        let flower = q("what color is the flower?");
        let a = variant2(&flower, PerturbSeed::new(5, flower.id));
        let b = variant2(&flower, PerturbSeed::new(5, flower.id));
        assert_eq!(a, b);
        let mut sorted = a.clone();
        sorted.sort();
        let mut orig = flower.tokens.clone();
        orig.sort();
        assert_eq!(sorted, orig);
        assert_eq!(variant2(&q("dog"), PerturbSeed::new(9, 1)), vec!["dog".to_string()]);
    }

    #[test]
    fn variant2_produces_several_permutations() {
        let flower = q("what color is the flower?");
        let distinct: std::collections::HashSet<_> = (0..50)
            .map(|s| variant2(&flower, PerturbSeed::new(s, flower.id)))
            .collect();
        assert!(distinct.len() >= 2);
    }

    #[test]
    fn variant_kind_parses() {
        assert_eq!("1".parse::<VariantKind>().unwrap(), VariantKind::Variant1);
        assert_eq!("variant3".parse::<VariantKind>().unwrap(), VariantKind::Variant3);
        assert!("4".parse::<VariantKind>().is_err());
    }
}
