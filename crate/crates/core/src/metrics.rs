//! Accuracy breakdowns, robustness to variant questions, prediction-flip
//! analysis and encoding dissimilarity.
//!
//! Percentages are plain `f64` in `[0, 100]`; `None` stands for an undefined
//! ratio (empty base set). Paired metrics align records by `question_id` and
//! fail when either side lacks an id present in the other.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::debias::cosine_sim;
use crate::error::{Error, Result};
use crate::io;
use crate::question::AnswerType;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub question_id: u64,
    pub pred: String,
    pub gold: String,
    pub correct: bool,
    pub qtype: String,
    pub answer_type: AnswerType,
}

impl PredictionRecord {
    pub fn new(question_id: u64, pred: String, gold: String, qtype: String, answer_type: AnswerType) -> Self {
        let correct = pred == gold;
        Self {
            question_id,
            pred,
            gold,
            correct,
            qtype,
            answer_type,
        }
    }
}

pub fn load_predictions(path: &Path) -> Result<Vec<PredictionRecord>> {
    io::read_jsonl(path)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct GroupStat {
    pub correct: usize,
    pub total: usize,
}

impl GroupStat {
    pub fn pct(&self) -> Option<f64> {
        (self.total > 0).then(|| 100.0 * self.correct as f64 / self.total as f64)
    }

    fn add(&mut self, correct: bool) {
        self.total += 1;
        self.correct += usize::from(correct);
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub all: GroupStat,
    pub yes_no: GroupStat,
    pub num: GroupStat,
    pub other: GroupStat,
    pub per_qtype: BTreeMap<String, GroupStat>,
}

impl AccuracyReport {
    pub fn by_answer_type(&self, t: AnswerType) -> GroupStat {
        match t {
            AnswerType::YesNo => self.yes_no,
            AnswerType::Num => self.num,
            AnswerType::Other => self.other,
        }
    }
}

pub fn accuracy(records: &[PredictionRecord]) -> AccuracyReport {
    let mut r = AccuracyReport::default();
    for rec in records {
        r.all.add(rec.correct);
        match rec.answer_type {
            AnswerType::YesNo => r.yes_no.add(rec.correct),
            AnswerType::Num => r.num.add(rec.correct),
            AnswerType::Other => r.other.add(rec.correct),
        }
        r.per_qtype.entry(rec.qtype.clone()).or_default().add(rec.correct);
    }
    r
}

/// Pairs every record of `orig` with the record of `variant` carrying the same id.
fn align<'a>(
    orig: &'a [PredictionRecord],
    variant: &'a [PredictionRecord],
) -> Result<Vec<(&'a PredictionRecord, &'a PredictionRecord)>> {
    let by_id: HashMap<u64, &PredictionRecord> =
        variant.iter().map(|r| (r.question_id, r)).collect();
    if by_id.len() != variant.len() {
        return Err(Error::Alignment("duplicate question_id in variant records".into()));
    }
    if orig.len() != variant.len() {
        return Err(Error::Alignment(format!(
            "{} original records vs {} variant records",
            orig.len(),
            variant.len()
        )));
    }
    orig.iter()
        .map(|o| {
            by_id
                .get(&o.question_id)
                .map(|v| (o, *v))
                .ok_or_else(|| Error::Alignment(format!("question {} missing from variant records", o.question_id)))
        })
        .collect()
}

/// Share of originally-correct questions whose variant is also correct.
pub fn rob(orig: &[PredictionRecord], variant: &[PredictionRecord]) -> Result<Option<f64>> {
    let pairs = align(orig, variant)?;
    let base = pairs.iter().filter(|(o, _)| o.correct).count();
    let both = pairs.iter().filter(|(o, v)| o.correct && v.correct).count();
    Ok((base > 0).then(|| 100.0 * both as f64 / base as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlipRatios {
    /// originally correct, now wrong
    pub c2w: Option<f64>,
    /// originally wrong, now correct
    pub w2c: Option<f64>,
}

pub fn flip_ratios(orig: &[PredictionRecord], variant: &[PredictionRecord]) -> Result<FlipRatios> {
    let pairs = align(orig, variant)?;
    let right = pairs.iter().filter(|(o, _)| o.correct).count();
    let wrong = pairs.len() - right;
    let c2w = pairs.iter().filter(|(o, v)| o.correct && !v.correct).count();
    let w2c = pairs.iter().filter(|(o, v)| !o.correct && v.correct).count();
    Ok(FlipRatios {
        c2w: (right > 0).then(|| 100.0 * c2w as f64 / right as f64),
        w2c: (wrong > 0).then(|| 100.0 * w2c as f64 / wrong as f64),
    })
}

/// Per answer type, question types ranked by how many samples flipped.
pub type FlipHistogram = BTreeMap<AnswerType, Vec<(String, usize)>>;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FlipBreakdown {
    pub w2c: FlipHistogram,
    pub c2w: FlipHistogram,
}

pub fn flip_breakdown(
    orig: &[PredictionRecord],
    variant: &[PredictionRecord],
    top_k: usize,
) -> Result<FlipBreakdown> {
    let pairs = align(orig, variant)?;
    let mut w2c: BTreeMap<AnswerType, BTreeMap<String, usize>> = BTreeMap::new();
    let mut c2w: BTreeMap<AnswerType, BTreeMap<String, usize>> = BTreeMap::new();
    for (o, v) in pairs {
        let target = match (o.correct, v.correct) {
            (false, true) => &mut w2c,
            (true, false) => &mut c2w,
            _ => continue,
        };
        *target
            .entry(o.answer_type)
            .or_default()
            .entry(o.qtype.clone())
            .or_default() += 1;
    }
    let rank = |hist: BTreeMap<AnswerType, BTreeMap<String, usize>>| -> FlipHistogram {
        hist.into_iter()
            .map(|(t, counts)| {
                let mut v: Vec<(String, usize)> = counts.into_iter().collect();
                v.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
                v.truncate(top_k);
                (t, v)
            })
            .collect()
    };
    Ok(FlipBreakdown {
        w2c: rank(w2c),
        c2w: rank(c2w),
    })
}

/// `1 − mean cos(q_i, var_i)`. Despite the name this is a dissimilarity:
/// identical encodings score 0, antipodal ones 2.
pub fn simi<T: Scalar>(q_encs: &[Vec<T>], var_encs: &[Vec<T>]) -> Result<T> {
    if q_encs.is_empty() {
        return Err(Error::Sim("no encodings".into()));
    }
    if q_encs.len() != var_encs.len() {
        return Err(Error::Alignment(format!(
            "{} original encodings vs {} variant encodings",
            q_encs.len(),
            var_encs.len()
        )));
    }
    let mut total = T::zero();
    for (q, v) in q_encs.iter().zip(var_encs) {
        total = total + cosine_sim(q, v)?;
    }
    Ok(T::one() - total / T::lit(q_encs.len() as f64))
}

/// Per-question-type majority answer learned from `(qtype, answer)` pairs.
#[derive(Debug, Clone, Default)]
pub struct MajorityBaseline {
    by_qtype: HashMap<String, String>,
    overall: String,
}

impl MajorityBaseline {
    pub fn fit<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Self {
        let mut counts: BTreeMap<&str, BTreeMap<&str, usize>> = BTreeMap::new();
        let mut overall: BTreeMap<&str, usize> = BTreeMap::new();
        for (q, a) in pairs {
            *counts.entry(q).or_default().entry(a).or_default() += 1;
            *overall.entry(a).or_default() += 1;
        }
        let top = |m: &BTreeMap<&str, usize>| {
            m.iter()
                .max_by(|x, y| x.1.cmp(y.1).then_with(|| y.0.cmp(x.0)))
                .map(|(a, _)| a.to_string())
                .unwrap_or_default()
        };
        Self {
            by_qtype: counts.iter().map(|(q, m)| (q.to_string(), top(m))).collect(),
            overall: top(&overall),
        }
    }

    pub fn predict(&self, qtype: &str) -> &str {
        self.by_qtype.get(qtype).unwrap_or(&self.overall)
    }
}

/// Round half to even at two decimals.
pub fn round2(x: f64) -> f64 {
    (x * 100.0).round_ties_even() / 100.0
}

pub fn fmt_pct(x: Option<f64>) -> String {
    match x {
        Some(v) => format!("{:.2}", round2(v)),
        None => "NA".into(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(id: u64, correct: bool) -> PredictionRecord {
        PredictionRecord {
            question_id: id,
            pred: if correct { "yes" } else { "no" }.into(),
            gold: "yes".into(),
            correct,
            qtype: "is there".into(),
            answer_type: AnswerType::YesNo,
        }
    }

    fn typed(id: u64, correct: bool, qtype: &str, t: AnswerType) -> PredictionRecord {
        PredictionRecord {
            qtype: qtype.into(),
            answer_type: t,
            ..rec(id, correct)
        }
    }

    #[test]
    fn accuracy_examples() {
        let recs = vec![rec(1, true), rec(2, true), rec(3, true), rec(4, false)];
        let r = accuracy(&recs);
        assert_eq!(r.all.pct(), Some(75.0));
        assert_eq!(r.num.total, 0);
        assert_eq!(r.num.pct(), None);
        let all = vec![
            typed(1, true, "a", AnswerType::Num),
            typed(2, true, "b", AnswerType::Other),
        ];
        let r = accuracy(&all);
        assert_eq!(r.all.pct(), Some(100.0));
        assert_eq!(r.num.pct(), Some(100.0));
        assert_eq!(r.other.pct(), Some(100.0));
        assert!(r.per_qtype.values().all(|g| g.pct() == Some(100.0)));
    }

    #[test]
    fn rob_examples() {
        let orig: Vec<_> = (1..=6).map(|i| rec(i, i <= 5)).collect();
        assert_eq!(rob(&orig, &orig).unwrap(), Some(100.0));
        let var: Vec<_> = (1..=6).map(|i| rec(i, i % 2 == 1)).collect();
        assert_eq!(rob(&orig, &var).unwrap(), Some(60.0));
        let wrong: Vec<_> = (1..=6).map(|i| rec(i, false)).collect();
        assert_eq!(rob(&orig, &wrong).unwrap(), Some(0.0));
        assert_eq!(rob(&wrong, &orig).unwrap(), None);
    }

    #[test]
    fn misaligned_dumps_fail() {
        let a = vec![rec(1, true), rec(2, true)];
        let b = vec![rec(1, true), rec(3, true)];
        assert!(matches!(rob(&a, &b), Err(Error::Alignment(_))));
        assert!(matches!(rob(&a, &b[..1]), Err(Error::Alignment(_))));
        assert!(matches!(flip_ratios(&a, &b), Err(Error::Alignment(_))));
    }

    #[test]
    fn flip_examples() {
        let same = vec![rec(1, true), rec(2, false)];
        let f = flip_ratios(&same, &same).unwrap();
        assert_eq!((f.c2w, f.w2c), (Some(0.0), Some(0.0)));

        // a,b correct; c,d,e wrong; variant loses a, fixes c and d
        let orig = vec![rec(1, true), rec(2, true), rec(3, false), rec(4, false), rec(5, false)];
        let var = vec![rec(1, false), rec(2, true), rec(3, true), rec(4, true), rec(5, false)];
        let f = flip_ratios(&orig, &var).unwrap();
        assert_eq!(f.c2w, Some(50.0));
        assert_eq!(fmt_pct(f.w2c), "66.67");

        let flipped: Vec<_> = orig.iter().map(|r| rec(r.question_id, !r.correct)).collect();
        let f = flip_ratios(&orig, &flipped).unwrap();
        assert_eq!((f.c2w, f.w2c), (Some(100.0), Some(100.0)));
    }

    #[test]
    fn flip_breakdown_fixture() {
        use AnswerType::*;
        let orig = vec![
            typed(1, false, "is there", YesNo),
            typed(2, false, "is there", YesNo),
            typed(3, false, "are there", YesNo),
            typed(4, true, "what color is the", Other),
            typed(5, true, "what color is the", Other),
            typed(6, true, "what is the", Other),
            typed(7, false, "how many", Num),
            typed(8, true, "how many", Num),
            typed(9, true, "is the", YesNo),
            typed(10, false, "what is the", Other),
        ];
        let flips = [1, 2, 3, 4, 5, 6, 7];
        let var: Vec<_> = orig
            .iter()
            .map(|r| {
                let mut v = r.clone();
                if flips.contains(&r.question_id) {
                    v.correct = !r.correct;
                }
                v
            })
            .collect();
        let b = flip_breakdown(&orig, &var, 10).unwrap();
        assert_eq!(
            b.w2c[&YesNo],
            vec![("is there".to_string(), 2), ("are there".to_string(), 1)]
        );
        assert_eq!(b.w2c[&Num], vec![("how many".to_string(), 1)]);
        assert_eq!(
            b.c2w[&Other],
            vec![("what color is the".to_string(), 2), ("what is the".to_string(), 1)]
        );
        assert!(!b.c2w.contains_key(&YesNo));
        let top1 = flip_breakdown(&orig, &var, 1).unwrap();
        assert_eq!(top1.w2c[&YesNo], vec![("is there".to_string(), 2)]);
        let none = flip_breakdown(&orig, &orig, 10).unwrap();
        assert!(none.w2c.is_empty() && none.c2w.is_empty());
    }

    #[test]
    fn simi_anchors() {
        let q = vec![vec![1.0, 2.0], vec![-3.0, 0.5]];
        assert!(simi::<f64>(&q, &q).unwrap().abs() < 1e-12);
        let orth = vec![vec![-2.0, 1.0], vec![0.5, 3.0]];
        assert!((simi::<f64>(&q, &orth).unwrap() - 1.0).abs() < 1e-12);
        let anti: Vec<Vec<f64>> = q.iter().map(|v| v.iter().map(|x| -2.0 * x).collect()).collect();
        assert!((simi(&q, &anti).unwrap() - 2.0).abs() < 1e-12);
        assert!(matches!(simi(&q, &[vec![0.0, 0.0], vec![1.0, 1.0]]), Err(Error::Sim(_))));
    }

    #[test]
    fn majority_baseline() {
        let pairs = [("is there", "yes"), ("is there", "yes"), ("is there", "no"), ("how many", "2")];
        let m = MajorityBaseline::fit(pairs);
        assert_eq!(m.predict("is there"), "yes");
        assert_eq!(m.predict("how many"), "2");
        assert_eq!(m.predict("unseen"), "yes");
    }

    #[test]
    fn rounding_is_half_even() {
        assert_eq!(fmt_pct(Some(12.125)), "12.12");
        assert_eq!(fmt_pct(Some(12.375)), "12.38");
        assert_eq!(fmt_pct(Some(100.0)), "100.00");
        assert_eq!(fmt_pct(None), "NA");
    }
}
