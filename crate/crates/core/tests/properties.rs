mod common;

use std::collections::HashMap;

use proptest::prelude::*;
use qbias::metrics::{accuracy, flip_ratios, rob, simi, PredictionRecord};
use qbias::perturb::{apply, VariantKind};
use qbias::question::{decompose, AnswerType, QTypeLexicon, Question, Vocab, PAD_ID};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn lexicon() -> QTypeLexicon {
    QTypeLexicon::from_phrases([
        ("is there", AnswerType::YesNo),
        ("what", AnswerType::Other),
        ("what color is", AnswerType::Other),
        ("what color is the", AnswerType::Other),
        ("how many", AnswerType::Num),
    ])
    .unwrap()
}

fn word() -> impl Strategy<Value = String> {
    prop::sample::select(vec!["is", "there", "a", "what", "color", "the", "how", "many", "dog", "red", "cup"])
        .prop_map(String::from)
}

fn question(words: &[String], id: u64) -> Question {
    Question::parse(id, &words.join(" "), &lexicon(), None, None).unwrap()
}

fn sorted(mut v: Vec<String>) -> Vec<String> {
    v.sort();
    v
}

proptest! {
    #[test]
    fn pad_has_fixed_length_and_is_idempotent(words in prop::collection::vec(word(), 0..20), len in 1usize..16) {
        let vocab = Vocab::build(["is", "there", "a", "dog"]);
        let ids = vocab.pad(&words, len);
        prop_assert_eq!(ids.len(), len);
        let surfaces: Vec<String> = ids.iter().map(|&i| vocab.surface(i).to_string()).collect();
        prop_assert_eq!(vocab.pad(&surfaces, len), ids.clone());
        let real = words.len().min(len);
        prop_assert!(ids[real..].iter().all(|&i| i == PAD_ID));
    }

    #[test]
    fn decomposition_reconstructs_the_question(words in prop::collection::vec(word(), 1..12)) {
        let lex = lexicon();
        let d = decompose(&words, &lex);
        let joined: Vec<String> = d.prefix.iter().chain(d.postfix).cloned().collect();
        prop_assert_eq!(joined, words.clone());
        let q = question(&words, 1);
        prop_assert_eq!(q.prefix().len() + q.postfix().len(), words.len());
    }

    #[test]
    fn variants_permute_tokens(words in prop::collection::vec(word(), 1..12), id in 0u64..1000, seed in any::<u64>()) {
        let q = question(&words, id);
        for kind in [VariantKind::Identity, VariantKind::Variant1, VariantKind::Variant2, VariantKind::Variant3] {
            let v = apply(kind, &q, seed);
            prop_assert_eq!(sorted(v.clone()), sorted(words.clone()));
            prop_assert_eq!(apply(kind, &q, seed), v);
        }
        let mut twice = q.clone();
        twice.tokens = apply(VariantKind::Variant3, &q, seed);
        prop_assert_eq!(apply(VariantKind::Variant3, &twice, seed), words.clone());
        let v1 = apply(VariantKind::Variant1, &q, seed);
        prop_assert_eq!(&v1[..q.postfix().len()], q.postfix());
    }

    #[test]
    fn metrics_ignore_record_order(seed in any::<u64>(), n in 1usize..80) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (orig, var) = common::random_records(&mut rng, n);
        let mut rev_orig = orig.clone();
        rev_orig.reverse();
        prop_assert_eq!(rob(&orig, &var).unwrap(), rob(&rev_orig, &var).unwrap());
        prop_assert_eq!(flip_ratios(&orig, &var).unwrap(), flip_ratios(&rev_orig, &var).unwrap());
        prop_assert_eq!(accuracy(&orig), accuracy(&rev_orig));
    }

    #[test]
    fn rob_and_c2w_partition_the_correct_set(seed in any::<u64>(), n in 1usize..80) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (orig, var) = common::random_records(&mut rng, n);
        match (rob(&orig, &var).unwrap(), flip_ratios(&orig, &var).unwrap().c2w) {
            (Some(r), Some(c)) => {
                let (num_r, num_c, den) = counts(&orig, &var);
                prop_assert_eq!(num_r + num_c, den);
                prop_assert!((r + c - 100.0).abs() < 1e-9);
            }
            (None, None) => {}
            other => prop_assert!(false, "{:?}", other),
        }
    }

    #[test]
    fn simi_ignores_positive_rescaling(
        a in prop::collection::vec(prop::collection::vec(0.1f64..2.0, 3), 1..6),
        b in prop::collection::vec(prop::collection::vec(-2.0f64..-0.1, 3), 1..6),
        scale in 0.01f64..100.0,
    ) {
        let n = a.len().min(b.len());
        let (a, b) = (&a[..n], &b[..n]);
        let scaled: Vec<Vec<f64>> = b.iter().map(|v| v.iter().map(|x| x * scale).collect()).collect();
        let s = simi(a, b).unwrap();
        prop_assert!((s - simi(a, &scaled).unwrap()).abs() < 1e-12);
        prop_assert!((0.0..=2.0).contains(&s));
    }
}

fn counts(orig: &[PredictionRecord], var: &[PredictionRecord]) -> (usize, usize, usize) {
    let by_id: HashMap<u64, bool> = var.iter().map(|r| (r.question_id, r.correct)).collect();
    let correct: Vec<&PredictionRecord> = orig.iter().filter(|r| r.correct).collect();
    let kept = correct.iter().filter(|r| by_id[&r.question_id]).count();
    (kept, correct.len() - kept, correct.len())
}
