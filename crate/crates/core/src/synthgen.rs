//! Synthetic changing-priors benchmark.
//!
//! A scene is a small set of object slots, each a one-hot object class
//! concatenated with a one-hot colour plus bounded noise. Questions come from
//! eight templates spanning the three answer types. Per question type the
//! answer marginal is skewed towards one answer in `train`/`test_id` and
//! shifted away from it in `test_ood`; object classes also co-occur with a
//! preferred colour more often in the training distribution.
//!
//! Samples are built constructively for a pre-allocated `(qtype, answer)`
//! slot and then re-checked against [`answer_oracle`].

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{self, AnswerRecord, QuestionRecord, SceneRecord};
use crate::perturb::mix64;
use crate::question::{AnswerType, QTypeLexicon, Question};

pub const OBJECT_NAMES: [(&str, &str); 30] = [
    ("dog", "dogs"),
    ("cat", "cats"),
    ("horse", "horses"),
    ("bird", "birds"),
    ("car", "cars"),
    ("bus", "buses"),
    ("truck", "trucks"),
    ("bike", "bikes"),
    ("boat", "boats"),
    ("plane", "planes"),
    ("train", "trains"),
    ("chair", "chairs"),
    ("table", "tables"),
    ("bed", "beds"),
    ("lamp", "lamps"),
    ("cup", "cups"),
    ("bowl", "bowls"),
    ("plate", "plates"),
    ("bottle", "bottles"),
    ("vase", "vases"),
    ("clock", "clocks"),
    ("book", "books"),
    ("phone", "phones"),
    ("laptop", "laptops"),
    ("ball", "balls"),
    ("kite", "kites"),
    ("hat", "hats"),
    ("shirt", "shirts"),
    ("umbrella", "umbrellas"),
    ("flower", "flowers"),
];

pub const COLOR_NAMES: [&str; 8] = [
    "red", "blue", "green", "yellow", "white", "black", "brown", "orange",
];

/// What a question template asks about the scene.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Ask {
    Exists,
    HasColor,
    Count,
    Color,
}

#[derive(Debug, Clone, Copy)]
struct Template {
    prefix: &'static str,
    /// `{o}` singular object, `{os}` plural object, `{c}` colour.
    postfix: &'static str,
    ask: Ask,
    answer_type: AnswerType,
}

const TEMPLATES: [Template; 8] = [
    Template { prefix: "is there", postfix: "a {o}", ask: Ask::Exists, answer_type: AnswerType::YesNo },
    Template { prefix: "are there", postfix: "any {os}", ask: Ask::Exists, answer_type: AnswerType::YesNo },
    Template { prefix: "is the", postfix: "{o} {c}", ask: Ask::HasColor, answer_type: AnswerType::YesNo },
    Template { prefix: "how many", postfix: "{os}", ask: Ask::Count, answer_type: AnswerType::Num },
    Template { prefix: "what number of", postfix: "{os} are there", ask: Ask::Count, answer_type: AnswerType::Num },
    Template { prefix: "what color is the", postfix: "{o}", ask: Ask::Color, answer_type: AnswerType::Other },
    Template { prefix: "what is the color of the", postfix: "{o}", ask: Ask::Color, answer_type: AnswerType::Other },
    Template { prefix: "what is the", postfix: "{o} color", ask: Ask::Color, answer_type: AnswerType::Other },
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    TestId,
    TestOod,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::TestId, Split::TestOod];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::TestId => "test_id",
            Split::TestOod => "test_ood",
        }
    }

    fn id_base(self) -> u64 {
        match self {
            Split::Train => 0,
            Split::TestId => 10_000_000,
            Split::TestOod => 20_000_000,
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "test_id" => Ok(Split::TestId),
            "test_ood" => Ok(Split::TestOod),
            other => Err(Error::Config(format!("unknown split {other:?}"))),
        }
    }
}

/// Answer prior for one question type: `answer` takes `train` share of the
/// mass in the training distribution and `ood` share in the shifted one. The
/// remaining mass is spread uniformly over the type's other answers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QTypePrior {
    pub qtype: String,
    pub answer: String,
    pub train: f64,
    pub ood: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BiasConfig {
    pub seed: u64,
    pub n_train: usize,
    pub n_test: usize,
    pub objects_per_scene: usize,
    pub num_objects: usize,
    pub num_colors: usize,
    pub max_count: usize,
    /// Half-width of the uniform noise added to every feature.
    pub noise: f64,
    /// Probability that an object takes its class's preferred colour, train distribution.
    pub cooccur_train: f64,
    /// Same, shifted distribution.
    pub cooccur_ood: f64,
    pub priors: Vec<QTypePrior>,
}

impl Default for BiasConfig {
    fn default() -> Self {
        let prior = |qtype: &str, answer: &str| QTypePrior {
            qtype: qtype.into(),
            answer: answer.into(),
            train: 0.8,
            ood: 0.2,
        };
        Self {
            seed: 42,
            n_train: 20_000,
            n_test: 4_000,
            objects_per_scene: 6,
            num_objects: 30,
            num_colors: 8,
            max_count: 5,
            noise: 0.05,
            cooccur_train: 0.8,
            cooccur_ood: 0.125,
            priors: vec![
                prior("is there", "yes"),
                prior("are there", "no"),
                prior("is the", "yes"),
                prior("how many", "2"),
                prior("what number of", "1"),
                prior("what color is the", "white"),
                prior("what is the color of the", "black"),
                prior("what is the", "red"),
            ],
        }
    }
}

impl BiasConfig {
    /// Same configuration with every answer marginal uniform in both
    /// distributions and no colour co-occurrence skew.
    pub fn unbiased(mut self) -> Self {
        let world = World::new(&self);
        let uniform_co = 1.0 / self.num_colors as f64;
        self.cooccur_train = uniform_co;
        self.cooccur_ood = uniform_co;
        for p in &mut self.priors {
            if let Some(t) = world.template_index(&p.qtype) {
                let n = world.answers_for(t).len() as f64;
                p.train = 1.0 / n;
                p.ood = 1.0 / n;
            }
        }
        self
    }

    pub fn dimension(&self) -> usize {
        self.num_objects + self.num_colors
    }
}

/// Object features for one image stand-in: `K × D_v`.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub objects: Vec<Vec<f64>>,
}

impl Scene {
    pub fn dim(&self) -> usize {
        self.objects.first().map_or(0, Vec::len)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub question: Question,
    pub scene: Scene,
    pub answer: String,
}

impl Sample {
    /// One-hot target over `answers`; all zeros if the gold answer is unseen.
    pub fn target(&self, answers: &[String]) -> Vec<f64> {
        answers
            .iter()
            .map(|a| if *a == self.answer { 1.0 } else { 0.0 })
            .collect()
    }
}

/// The generator's vocabulary of objects, colours, templates and answers.
#[derive(Debug, Clone)]
pub struct World {
    num_objects: usize,
    num_colors: usize,
    max_count: usize,
    answers: Vec<String>,
}

impl World {
    pub fn new(cfg: &BiasConfig) -> Self {
        let mut answers = vec!["yes".to_string(), "no".to_string()];
        answers.extend((0..=cfg.max_count).map(|c| c.to_string()));
        answers.extend(
            COLOR_NAMES
                .iter()
                .take(cfg.num_colors)
                .map(|c| c.to_string()),
        );
        Self {
            num_objects: cfg.num_objects.min(OBJECT_NAMES.len()),
            num_colors: cfg.num_colors.min(COLOR_NAMES.len()),
            max_count: cfg.max_count,
            answers,
        }
    }

    pub fn answers(&self) -> &[String] {
        &self.answers
    }

    pub fn lexicon(&self) -> QTypeLexicon {
        QTypeLexicon::from_phrases(TEMPLATES.iter().map(|t| (t.prefix, t.answer_type)))
            .expect("template prefixes are distinct")
    }

    fn template_index(&self, qtype: &str) -> Option<usize> {
        TEMPLATES.iter().position(|t| t.prefix == qtype)
    }

    /// Answers reachable for template `t`.
    fn answers_for(&self, t: usize) -> Vec<String> {
        match TEMPLATES[t].ask {
            Ask::Exists | Ask::HasColor => vec!["yes".into(), "no".into()],
            Ask::Count => (0..=self.max_count).map(|c| c.to_string()).collect(),
            Ask::Color => COLOR_NAMES[..self.num_colors]
                .iter()
                .map(|c| c.to_string())
                .collect(),
        }
    }

    fn preferred_color(&self, class: usize) -> usize {
        class % self.num_colors
    }

    fn object_by_word(&self, word: &str) -> Option<(usize, bool)> {
        OBJECT_NAMES[..self.num_objects]
            .iter()
            .enumerate()
            .find_map(|(i, (s, p))| {
                if *s == word {
                    Some((i, false))
                } else if *p == word {
                    Some((i, true))
                } else {
                    None
                }
            })
    }

    fn color_by_word(&self, word: &str) -> Option<usize> {
        COLOR_NAMES[..self.num_colors].iter().position(|c| *c == word)
    }

    fn feature(&self, class: usize, color: usize, rng: &mut impl Rng, noise: f64) -> Vec<f64> {
        let mut v = vec![0.0; self.num_objects + self.num_colors];
        v[class] = 1.0;
        v[self.num_objects + color] = 1.0;
        if noise > 0.0 {
            for x in &mut v {
                *x += rng.random_range(-noise..noise);
            }
        }
        v
    }

    fn decode(&self, slot: &[f64]) -> Result<(usize, usize)> {
        if slot.len() != self.num_objects + self.num_colors {
            return Err(Error::Oracle(format!(
                "object slot has dimension {}, expected {}",
                slot.len(),
                self.num_objects + self.num_colors
            )));
        }
        let argmax = |xs: &[f64]| {
            xs.iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (i, &x)| if x > best.1 { (i, x) } else { best })
                .0
        };
        Ok((
            argmax(&slot[..self.num_objects]),
            argmax(&slot[self.num_objects..]),
        ))
    }
}

/// Ground-truth answer text for `question` on `scene`.
pub fn answer_oracle(world: &World, question: &Question, scene: &Scene) -> Result<String> {
    let unrecognized = || Error::Oracle(format!("unrecognized template: {:?}", question.render()));
    let t = question
        .qtype
        .as_deref()
        .and_then(|q| world.template_index(q))
        .ok_or_else(unrecognized)?;
    let template = TEMPLATES[t];
    let mut object = None;
    let mut color = None;
    for w in question.postfix() {
        if let Some(o) = world.object_by_word(w) {
            object = Some(o.0);
        } else if let Some(c) = world.color_by_word(w) {
            color = Some(c);
        }
    }
    let object = object.ok_or_else(unrecognized)?;
    let slots = scene
        .objects
        .iter()
        .map(|s| world.decode(s))
        .collect::<Result<Vec<_>>>()?;
    let matching: Vec<usize> = slots
        .iter()
        .filter(|(cls, _)| *cls == object)
        .map(|&(_, col)| col)
        .collect();
    let yes_no = |b: bool| if b { "yes" } else { "no" }.to_string();
    match template.ask {
        Ask::Exists => Ok(yes_no(!matching.is_empty())),
        Ask::Count => Ok(matching.len().to_string()),
        Ask::HasColor | Ask::Color if matching.is_empty() => Err(Error::Oracle(format!(
            "{:?} refers to an object absent from the scene",
            question.render()
        ))),
        Ask::HasColor => {
            let asked = color.ok_or_else(unrecognized)?;
            Ok(yes_no(matching[0] == asked))
        }
        Ask::Color => Ok(COLOR_NAMES[matching[0]].to_string()),
    }
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub lexicon: QTypeLexicon,
    pub answers: Vec<String>,
    pub train: Vec<Sample>,
    pub test_id: Vec<Sample>,
    pub test_ood: Vec<Sample>,
}

impl Dataset {
    pub fn split(&self, split: Split) -> &[Sample] {
        match split {
            Split::Train => &self.train,
            Split::TestId => &self.test_id,
            Split::TestOod => &self.test_ood,
        }
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        io::write_atomic(&dir.join("lexicon.tsv"), self.lexicon.to_file_string().as_bytes())?;
        let answers: String = self.answers.iter().map(|a| format!("{a}\n")).collect();
        io::write_atomic(&dir.join("answers.txt"), answers.as_bytes())?;
        for split in Split::ALL {
            let samples = self.split(split);
            let sub = dir.join(split.as_str());
            let questions: Vec<QuestionRecord> = samples
                .iter()
                .map(|s| QuestionRecord {
                    question_id: s.question.id,
                    question: s.question.render(),
                    question_type: s.question.qtype.clone(),
                    answer_type: Some(s.question.answer_type),
                })
                .collect();
            let scenes: Vec<SceneRecord> = samples
                .iter()
                .map(|s| SceneRecord {
                    question_id: s.question.id,
                    features: s.scene.objects.clone(),
                })
                .collect();
            let answers: Vec<AnswerRecord> = samples
                .iter()
                .map(|s| AnswerRecord {
                    question_id: s.question.id,
                    answer: s.answer.clone(),
                    answer_type: s.question.answer_type,
                })
                .collect();
            io::write_jsonl(&sub.join("questions.jsonl"), &questions)?;
            io::write_jsonl(&sub.join("scenes.jsonl"), &scenes)?;
            io::write_jsonl(&sub.join("answers.jsonl"), &answers)?;
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let lexicon = QTypeLexicon::load(&dir.join("lexicon.tsv"))?;
        let answers_path = dir.join("answers.txt");
        let answers = std::fs::read_to_string(&answers_path)
            .map_err(|e| Error::io(&answers_path, e))?
            .lines()
            .filter(|l| !l.is_empty())
            .map(String::from)
            .collect();
        let mut splits = Vec::new();
        for split in Split::ALL {
            splits.push(load_split(&dir.join(split.as_str()), &lexicon)?);
        }
        let test_ood = splits.pop().unwrap();
        let test_id = splits.pop().unwrap();
        let train = splits.pop().unwrap();
        Ok(Self {
            lexicon,
            answers,
            train,
            test_id,
            test_ood,
        })
    }
}

fn load_split(dir: &Path, lexicon: &QTypeLexicon) -> Result<Vec<Sample>> {
    let questions: Vec<QuestionRecord> = io::read_jsonl(&dir.join("questions.jsonl"))?;
    let scenes: Vec<SceneRecord> = io::read_jsonl(&dir.join("scenes.jsonl"))?;
    let answers: Vec<AnswerRecord> = io::read_jsonl(&dir.join("answers.jsonl"))?;
    let mut scenes: BTreeMap<u64, Vec<Vec<f64>>> =
        scenes.into_iter().map(|s| (s.question_id, s.features)).collect();
    let mut answers: BTreeMap<u64, String> =
        answers.into_iter().map(|a| (a.question_id, a.answer)).collect();
    questions
        .into_iter()
        .map(|rec| {
            let question = Question::parse(
                rec.question_id,
                &rec.question,
                lexicon,
                rec.question_type.as_deref(),
                rec.answer_type,
            )?;
            let missing = |what: &str| {
                Error::Alignment(format!(
                    "{}: question {} has no {what}",
                    dir.display(),
                    rec.question_id
                ))
            };
            let objects = scenes.remove(&rec.question_id).ok_or_else(|| missing("scene"))?;
            let answer = answers.remove(&rec.question_id).ok_or_else(|| missing("answer"))?;
            Ok(Sample {
                question,
                scene: Scene { objects },
                answer,
            })
        })
        .collect()
}

/// Largest-remainder apportionment of `total` items over `weights`.
fn apportion(total: usize, weights: &[f64]) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    let exact: Vec<f64> = weights.iter().map(|w| w / sum * total as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|x| x.floor() as usize).collect();
    let mut rest = total - counts.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
    });
    for i in order {
        if rest == 0 {
            break;
        }
        counts[i] += 1;
        rest -= 1;
    }
    counts
}

struct Generator<'a> {
    cfg: &'a BiasConfig,
    world: World,
    lexicon: QTypeLexicon,
    /// Per template, per answer: (train share, ood share).
    marginals: Vec<Vec<(String, f64, f64)>>,
}

impl<'a> Generator<'a> {
    fn new(cfg: &'a BiasConfig) -> Result<Self> {
        let fail = |msg: String| Err(Error::Generation(msg));
        if cfg.n_train == 0 {
            return fail("n_train must be positive".into());
        }
        if cfg.objects_per_scene == 0 {
            return fail("objects_per_scene must be positive".into());
        }
        if cfg.num_objects < 2 || cfg.num_objects > OBJECT_NAMES.len() {
            return fail(format!("num_objects must be in 2..={}", OBJECT_NAMES.len()));
        }
        if cfg.num_colors < 2 || cfg.num_colors > COLOR_NAMES.len() {
            return fail(format!("num_colors must be in 2..={}", COLOR_NAMES.len()));
        }
        if cfg.max_count > cfg.objects_per_scene {
            return fail(format!(
                "max_count {} unreachable with {} objects per scene",
                cfg.max_count, cfg.objects_per_scene
            ));
        }
        if !(0.0..0.1).contains(&cfg.noise) {
            return fail(format!("noise {} must be in [0, 0.1)", cfg.noise));
        }
        for (name, p) in [("cooccur_train", cfg.cooccur_train), ("cooccur_ood", cfg.cooccur_ood)] {
            if !(0.0..=1.0).contains(&p) {
                return fail(format!("{name} = {p} is not a probability"));
            }
        }
        let world = World::new(cfg);
        let mut marginals = Vec::new();
        for (t, template) in TEMPLATES.iter().enumerate() {
            let answers = world.answers_for(t);
            let uniform = 1.0 / answers.len() as f64;
            let prior = cfg.priors.iter().find(|p| p.qtype == template.prefix);
            let row = match prior {
                None => answers.into_iter().map(|a| (a, uniform, uniform)).collect(),
                Some(p) => {
                    for (name, share) in [("train", p.train), ("ood", p.ood)] {
                        if !(0.0..=1.0).contains(&share) {
                            return fail(format!("{:?} {name} share {share} is not a probability", p.qtype));
                        }
                    }
                    if !answers.contains(&p.answer) {
                        return fail(format!(
                            "answer {:?} is unreachable for question type {:?}",
                            p.answer, p.qtype
                        ));
                    }
                    let others = (answers.len() - 1) as f64;
                    answers
                        .into_iter()
                        .map(|a| {
                            if a == p.answer {
                                (a, p.train, p.ood)
                            } else {
                                (a, (1.0 - p.train) / others, (1.0 - p.ood) / others)
                            }
                        })
                        .collect()
                }
            };
            marginals.push(row);
        }
        for p in &cfg.priors {
            if world.template_index(&p.qtype).is_none() {
                return fail(format!("unknown question type {:?}", p.qtype));
            }
        }
        let lexicon = world.lexicon();
        Ok(Self {
            cfg,
            world,
            lexicon,
            marginals,
        })
    }

    fn split(&self, split: Split, n: usize) -> Result<Vec<Sample>> {
        let ood = split == Split::TestOod;
        let mut slots = Vec::with_capacity(n);
        let per_type = apportion(n, &vec![1.0; TEMPLATES.len()]);
        for (t, &n_t) in per_type.iter().enumerate() {
            let weights: Vec<f64> = self.marginals[t]
                .iter()
                .map(|(_, tr, od)| if ood { *od } else { *tr })
                .collect();
            if weights.iter().sum::<f64>() <= 0.0 {
                return Err(Error::Generation(format!(
                    "answer marginal for {:?} has no mass",
                    TEMPLATES[t].prefix
                )));
            }
            for (a, &count) in apportion(n_t, &weights).iter().enumerate() {
                slots.extend(std::iter::repeat_n((t, a), count));
            }
        }
        let split_seed = mix64(self.cfg.seed ^ mix64(split as u64 + 1));
        slots.shuffle(&mut ChaCha8Rng::seed_from_u64(split_seed));

        let samples = slots
            .iter()
            .enumerate()
            .map(|(i, &(t, a))| {
                let id = split.id_base() + i as u64;
                let mut rng = ChaCha8Rng::seed_from_u64(mix64(split_seed ^ mix64(i as u64)));
                self.sample(id, t, &self.marginals[t][a].0, ood, &mut rng)
            })
            .collect::<Result<Vec<_>>>()?;

        if split != Split::TestOod {
            self.check_marginals(split, &samples, false)?;
        } else {
            self.check_marginals(split, &samples, true)?;
        }
        Ok(samples)
    }

    fn check_marginals(&self, split: Split, samples: &[Sample], ood: bool) -> Result<()> {
        for (t, template) in TEMPLATES.iter().enumerate() {
            let of_type: Vec<&Sample> = samples
                .iter()
                .filter(|s| s.question.qtype.as_deref() == Some(template.prefix))
                .collect();
            if of_type.is_empty() {
                continue;
            }
            // apportionment can miss a target by at most one sample
            let tol = 0.03 + 1.0 / of_type.len() as f64;
            for (answer, tr, od) in &self.marginals[t] {
                let want = if ood { *od } else { *tr };
                let got = of_type.iter().filter(|s| &s.answer == answer).count() as f64
                    / of_type.len() as f64;
                if (got - want).abs() > tol {
                    return Err(Error::Generation(format!(
                        "{split}: P({answer}|{}) = {got:.3}, requested {want:.3}",
                        template.prefix
                    )));
                }
            }
        }
        Ok(())
    }

    fn color_for(&self, class: usize, ood: bool, rng: &mut impl Rng) -> usize {
        let p = if ood {
            self.cfg.cooccur_ood
        } else {
            self.cfg.cooccur_train
        };
        if rng.random_bool(p) {
            self.world.preferred_color(class)
        } else {
            rng.random_range(0..self.world.num_colors)
        }
    }

    fn sample(&self, id: u64, t: usize, answer: &str, ood: bool, rng: &mut ChaCha8Rng) -> Result<Sample> {
        let template = TEMPLATES[t];
        let k = self.cfg.objects_per_scene;
        let n_obj = self.world.num_objects;
        let n_col = self.world.num_colors;
        let co = if ood {
            self.cfg.cooccur_ood
        } else {
            self.cfg.cooccur_train
        };

        // (class, colour) of the slots the question is about
        let mut target_slots: Vec<(usize, usize)> = Vec::new();
        let mut asked_color = None;
        let object = match template.ask {
            Ask::Color => {
                let color = self.world.color_by_word(answer).expect("colour answer");
                let preferring: Vec<usize> = (0..n_obj)
                    .filter(|&c| self.world.preferred_color(c) == color)
                    .collect();
                let class = if !preferring.is_empty() && rng.random_bool(co) {
                    *preferring.choose(rng).unwrap()
                } else {
                    rng.random_range(0..n_obj)
                };
                target_slots.push((class, color));
                class
            }
            Ask::HasColor => {
                let class = rng.random_range(0..n_obj);
                let color = self.color_for(class, ood, rng);
                target_slots.push((class, color));
                asked_color = Some(if answer == "yes" {
                    color
                } else {
                    (color + rng.random_range(1..n_col)) % n_col
                });
                class
            }
            Ask::Exists => {
                let class = rng.random_range(0..n_obj);
                if answer == "yes" {
                    let copies = rng.random_range(1..=2.min(k));
                    for _ in 0..copies {
                        target_slots.push((class, self.color_for(class, ood, rng)));
                    }
                }
                class
            }
            Ask::Count => {
                let class = rng.random_range(0..n_obj);
                let count: usize = answer.parse().expect("count answer");
                for _ in 0..count {
                    target_slots.push((class, self.color_for(class, ood, rng)));
                }
                class
            }
        };

        let mut features: Vec<Vec<f64>> = target_slots
            .iter()
            .map(|&(cls, col)| self.world.feature(cls, col, rng, self.cfg.noise))
            .collect();
        while features.len() < k {
            let mut cls = rng.random_range(0..n_obj - 1);
            if cls >= object {
                cls += 1;
            }
            let col = self.color_for(cls, ood, rng);
            features.push(self.world.feature(cls, col, rng, self.cfg.noise));
        }
        features.shuffle(rng);

        let (singular, plural) = OBJECT_NAMES[object];
        let postfix = template
            .postfix
            .replace("{os}", plural)
            .replace("{o}", singular)
            .replace("{c}", asked_color.map_or("", |c| COLOR_NAMES[c]));
        let text = format!("{} {}?", template.prefix, postfix);
        let question = Question::parse(id, &text, &self.lexicon, None, None)?;
        let scene = Scene { objects: features };
        let oracle = answer_oracle(&self.world, &question, &scene)?;
        if oracle != answer {
            return Err(Error::Generation(format!(
                "sample {id}: constructed answer {answer:?} but oracle says {oracle:?}"
            )));
        }
        Ok(Sample {
            question,
            scene,
            answer: answer.to_string(),
        })
    }
}

pub fn generate(cfg: &BiasConfig) -> Result<Dataset> {
    let generator = Generator::new(cfg)?;
    let train = generator.split(Split::Train, cfg.n_train)?;
    let test_id = generator.split(Split::TestId, cfg.n_test)?;
    let test_ood = generator.split(Split::TestOod, cfg.n_test)?;
    Ok(Dataset {
        lexicon: generator.lexicon.clone(),
        answers: generator.world.answers().to_vec(),
        train,
        test_id,
        test_ood,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> BiasConfig {
        BiasConfig {
            n_train: 800,
            n_test: 400,
            ..BiasConfig::default()
        }
    }

    fn scene(world: &World, slots: &[(&str, &str)]) -> Scene {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        Scene {
            objects: slots
                .iter()
                .map(|(o, c)| {
                    let cls = world.object_by_word(o).unwrap().0;
                    let col = world.color_by_word(c).unwrap();
                    world.feature(cls, col, &mut rng, 0.05)
                })
                .collect(),
        }
    }

    fn ask(world: &World, text: &str, s: &Scene) -> Result<String> {
        let q = Question::parse(0, text, &world.lexicon(), None, None).unwrap();
        answer_oracle(world, &q, s)
    }

    #[test]
    fn oracle_examples() {
        let world = World::new(&BiasConfig::default());
        let s = scene(
            &world,
            &[("flower", "yellow"), ("dog", "brown"), ("dog", "black"), ("dog", "white"), ("shirt", "red")],
        );
        assert_eq!(ask(&world, "is there a flower?", &s).unwrap(), "yes");
        assert_eq!(ask(&world, "is there a cat?", &s).unwrap(), "no");
        assert_eq!(ask(&world, "how many dogs?", &s).unwrap(), "3");
        assert_eq!(ask(&world, "what number of cats are there?", &s).unwrap(), "0");
        assert_eq!(ask(&world, "what color is the shirt?", &s).unwrap(), "red");
        assert_eq!(ask(&world, "what is the shirt color?", &s).unwrap(), "red");
        assert_eq!(ask(&world, "is the shirt red?", &s).unwrap(), "yes");
        assert_eq!(ask(&world, "is the flower red?", &s).unwrap(), "no");
        assert!(matches!(ask(&world, "why is the sky blue?", &s), Err(Error::Oracle(_))));
        assert!(matches!(ask(&world, "what color is the cat?", &s), Err(Error::Oracle(_))));
    }

    #[test]
    fn every_sample_matches_oracle() {
        let cfg = small();
        let ds = generate(&cfg).unwrap();
        let world = World::new(&cfg);
        for split in Split::ALL {
            for s in ds.split(split) {
                assert_eq!(answer_oracle(&world, &s.question, &s.scene).unwrap(), s.answer);
                assert_eq!(s.scene.objects.len(), cfg.objects_per_scene);
                assert_eq!(s.scene.dim(), cfg.dimension());
            }
        }
        assert_eq!(ds.train.len(), 800);
        assert_eq!(ds.test_ood.len(), 400);
    }

    #[test]
    fn scene_noise_is_bounded() {
        let ds = generate(&small()).unwrap();
        for s in &ds.train {
            for slot in &s.scene.objects {
                let hot = slot.iter().filter(|&&x| x > 0.5).count();
                assert_eq!(hot, 2);
                assert!(slot.iter().all(|&x| (x.abs() < 0.1) || ((x - 1.0).abs() < 0.1)));
            }
        }
    }

    #[test]
    fn measured_marginals_match_config() {
        let cfg = BiasConfig::default();
        let ds = generate(&BiasConfig {
            n_train: 4000,
            n_test: 2000,
            ..cfg.clone()
        })
        .unwrap();
        for prior in &cfg.priors {
            for (samples, want) in [(&ds.train, prior.train), (&ds.test_ood, prior.ood)] {
                let of_type: Vec<_> = samples
                    .iter()
                    .filter(|s| s.question.qtype.as_deref() == Some(&prior.qtype))
                    .collect();
                let hits = of_type.iter().filter(|s| s.answer == prior.answer).count();
                let got = hits as f64 / of_type.len() as f64;
                assert!((got - want).abs() <= 0.03, "{} {got} vs {want}", prior.qtype);
            }
        }
    }

    #[test]
    fn unbiased_splits_are_indistinguishable() {
        // chi-square 0.99 quantiles for 1..=9 degrees of freedom
        const CRIT: [f64; 9] = [6.635, 9.210, 11.345, 13.277, 15.086, 16.812, 18.475, 20.090, 21.666];
        let cfg = BiasConfig::default().unbiased();
        let ds = generate(&BiasConfig {
            n_train: 4000,
            n_test: 2000,
            ..cfg.clone()
        })
        .unwrap();
        let world = World::new(&cfg);
        for t in TEMPLATES {
            let counts = |samples: &[Sample]| -> BTreeMap<String, f64> {
                let mut m = BTreeMap::new();
                for s in samples.iter().filter(|s| s.question.qtype.as_deref() == Some(t.prefix)) {
                    *m.entry(s.answer.clone()).or_insert(0.0) += 1.0;
                }
                m
            };
            let (a, b) = (counts(&ds.train), counts(&ds.test_ood));
            let (na, nb) = (a.values().sum::<f64>(), b.values().sum::<f64>());
            let mut stat = 0.0;
            let mut cells = 0;
            for ans in world.answers() {
                let (oa, ob) = (a.get(ans).copied().unwrap_or(0.0), b.get(ans).copied().unwrap_or(0.0));
                if oa + ob == 0.0 {
                    continue;
                }
                cells += 1;
                let ea = (oa + ob) * na / (na + nb);
                let eb = (oa + ob) * nb / (na + nb);
                stat += (oa - ea).powi(2) / ea + (ob - eb).powi(2) / eb;
            }
            assert!(cells >= 2, "{}", t.prefix);
            assert!(stat < CRIT[cells - 2], "{}: chi2 {stat:.2} with {} df", t.prefix, cells - 1);
        }
    }

    #[test]
    fn degenerate_and_infeasible_configs_are_rejected() {
        let zero = BiasConfig {
            n_train: 0,
            ..small()
        };
        assert!(matches!(generate(&zero), Err(Error::Generation(_))));
        let mut bad_answer = small();
        bad_answer.priors[3].answer = "red".into();
        assert!(matches!(generate(&bad_answer), Err(Error::Generation(_))));
        let big_count = BiasConfig {
            max_count: 7,
            ..small()
        };
        assert!(matches!(generate(&big_count), Err(Error::Generation(_))));
        let mut bad_p = small();
        bad_p.priors[0].train = 1.5;
        assert!(matches!(generate(&bad_p), Err(Error::Generation(_))));
    }

    #[test]
    fn same_config_same_dataset() {
        let a = generate(&small()).unwrap();
        let b = generate(&small()).unwrap();
        assert_eq!(a.train, b.train);
        assert_eq!(a.test_ood, b.test_ood);
        let c = generate(&BiasConfig { seed: 7, ..small() }).unwrap();
        assert_ne!(a.train, c.train);
    }

    #[test]
    fn apportion_is_exact() {
        assert_eq!(apportion(10, &[0.5, 0.25, 0.25]), vec![5, 3, 2]);
        assert_eq!(apportion(7, &[1.0; 3]).iter().sum::<usize>(), 7);
        assert_eq!(apportion(0, &[1.0, 2.0]), vec![0, 0]);
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let ds = generate(&BiasConfig {
            n_train: 40,
            n_test: 16,
            ..BiasConfig::default()
        })
        .unwrap();
        ds.save(dir.path()).unwrap();
        let back = Dataset::load(dir.path()).unwrap();
        assert_eq!(back.train, ds.train);
        assert_eq!(back.test_id, ds.test_id);
        assert_eq!(back.answers, ds.answers);
    }
}
