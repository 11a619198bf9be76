//! Aggregate tables built from a directory of finished runs.
//!
//! Every table is keyed by what a run was trained on (input, model mode,
//! debiasing method), so any recipe that contains the right cells fills the
//! matching rows; missing cells show up as `NA`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::debias::DebiasMethod;
use crate::error::{Error, Result};
use crate::io;
use crate::matrix::CellRecord;
use crate::metrics::{accuracy, flip_breakdown, flip_ratios, fmt_pct, load_predictions, rob, PredictionRecord};
use crate::model::ModelMode;
use crate::question::AnswerType;
use crate::synthgen::Split;
use crate::trainer::{prediction_file, Analysis, InputMode};

/// A finished (or attempted) run found on disk.
#[derive(Debug, Clone)]
pub struct RunEntry {
    pub record: CellRecord,
    pub dir: PathBuf,
}

impl RunEntry {
    fn mode(&self) -> ModelMode {
        self.record.train.model_mode
    }

    fn method(&self) -> DebiasMethod {
        self.record.train.debias.method
    }

    fn predictions(&self, input: InputMode, split: Split) -> Result<Option<Vec<PredictionRecord>>> {
        let path = self.dir.join(prediction_file(input, split));
        if path.exists() {
            load_predictions(&path).map(Some)
        } else {
            Ok(None)
        }
    }

    fn analysis(&self) -> Result<Option<Analysis>> {
        let path = self.dir.join("analysis.json");
        if path.exists() {
            io::read_json(&path).map(Some)
        } else {
            Ok(None)
        }
    }
}

/// Finds every `runs/<cell>/seed<s>/cell.json` below `out_dir`, ordered by
/// cell name then seed.
pub fn collect_runs(out_dir: &Path) -> Result<Vec<RunEntry>> {
    let runs = out_dir.join("runs");
    let mut found = Vec::new();
    if !runs.exists() {
        return Ok(found);
    }
    let read = |p: &Path| std::fs::read_dir(p).map_err(|e| Error::io(p, e));
    for cell in read(&runs)? {
        let cell = cell.map_err(|e| Error::io(&runs, e))?.path();
        if !cell.is_dir() {
            continue;
        }
        for seed in read(&cell)? {
            let dir = seed.map_err(|e| Error::io(&cell, e))?.path();
            let meta = dir.join("cell.json");
            if meta.exists() {
                found.push(RunEntry {
                    record: io::read_json(&meta)?,
                    dir,
                });
            }
        }
    }
    found.sort_by(|a, b| (&a.record.cell, a.record.seed).cmp(&(&b.record.cell, b.record.seed)));
    Ok(found)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub title: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(name: &str, title: &str, header: &[&str]) -> Self {
        Self {
            name: name.into(),
            title: title.into(),
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let csv_err = |e: csv::Error| Error::Config(format!("csv: {e}"));
        w.write_record(&self.header).map_err(csv_err)?;
        for r in &self.rows {
            w.write_record(r).map_err(csv_err)?;
        }
        w.into_inner().map_err(|e| Error::Config(format!("csv: {e}")))
    }

    /// Column-aligned plain text.
    pub fn to_text(&self) -> String {
        let mut widths: Vec<usize> = self.header.iter().map(String::len).collect();
        for r in &self.rows {
            for (w, c) in widths.iter_mut().zip(r) {
                *w = (*w).max(c.len());
            }
        }
        let line = |cells: &[String]| {
            cells
                .iter()
                .zip(&widths)
                .map(|(c, w)| format!("{c:<w$}"))
                .collect::<Vec<_>>()
                .join("  ")
                .trim_end()
                .to_string()
        };
        let mut out = format!("{}\n{}\n", self.title, line(&self.header));
        for r in &self.rows {
            out.push_str(&line(r));
            out.push('\n');
        }
        out
    }
}

/// The whole report: tables in a fixed order.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub tables: Vec<Table>,
    pub missing: Vec<String>,
}

struct Index<'a> {
    runs: &'a [RunEntry],
}

impl<'a> Index<'a> {
    /// First run (by cell name) matching the description.
    fn find(&self, seed: u64, input: InputMode, mode: ModelMode, method: DebiasMethod) -> Option<&'a RunEntry> {
        self.runs.iter().find(|r| {
            r.record.seed == seed
                && r.record.train.train_input == input
                && r.mode() == mode
                && r.method() == method
        })
    }

    fn seeds(&self) -> Vec<u64> {
        let mut s: Vec<u64> = self.runs.iter().map(|r| r.record.seed).collect();
        s.sort_unstable();
        s.dedup();
        s
    }

    fn modes(&self) -> Vec<ModelMode> {
        let mut m: Vec<ModelMode> = Vec::new();
        for mode in [ModelMode::Full, ModelMode::QOnly] {
            if self.runs.iter().any(|r| r.mode() == mode) {
                m.push(mode);
            }
        }
        m
    }
}

fn mode_name(m: ModelMode) -> &'static str {
    match m {
        ModelMode::Full => "full",
        ModelMode::QOnly => "q_only",
    }
}

const VARIANTS: [InputMode; 3] = [InputMode::Variant1, InputMode::Variant2, InputMode::Variant3];

struct Builder<'a> {
    idx: Index<'a>,
    splits: Vec<Split>,
    missing: Vec<String>,
}

impl<'a> Builder<'a> {
    fn preds(&mut self, run: Option<&RunEntry>, input: InputMode, split: Split) -> Result<Option<Vec<PredictionRecord>>> {
        let Some(run) = run else { return Ok(None) };
        let p = run.predictions(input, split)?;
        if p.is_none() {
            self.missing
                .push(format!("{}/seed{}: {}", run.record.cell, run.record.seed, prediction_file(input, split)));
        }
        Ok(p)
    }

    fn acc(&mut self, run: Option<&RunEntry>, input: InputMode, split: Split) -> Result<String> {
        Ok(fmt_pct(self.preds(run, input, split)?.and_then(|p| accuracy(&p).all.pct())))
    }

    /// Run trained on `train` without debiasing.
    fn plain(&self, seed: u64, train: InputMode, mode: ModelMode) -> Option<&'a RunEntry> {
        self.idx.find(seed, train, mode, DebiasMethod::None)
    }

    fn table1(&mut self) -> Result<Table> {
        let mut t = Table::new(
            "table1",
            "Accuracy (%) by input mode: *_train trained on a part and tested on the question, *_test trained on the question and tested on a part",
            &["seed", "model", "split", "ques", "pre_train", "post_train", "pre_test", "post_test"],
        );
        for seed in self.idx.seeds() {
            for mode in self.idx.modes() {
                for split in self.splits.clone() {
                    let q = self.plain(seed, InputMode::Question, mode);
                    let pre = self.plain(seed, InputMode::Prefix, mode);
                    let post = self.plain(seed, InputMode::Postfix, mode);
                    if q.is_none() && pre.is_none() && post.is_none() {
                        continue;
                    }
                    let row = vec![
                        seed.to_string(),
                        mode_name(mode).into(),
                        split.to_string(),
                        self.acc(q, InputMode::Question, split)?,
                        self.acc(pre, InputMode::Question, split)?,
                        self.acc(post, InputMode::Question, split)?,
                        self.acc(q, InputMode::Prefix, split)?,
                        self.acc(q, InputMode::Postfix, split)?,
                    ];
                    t.rows.push(row);
                }
            }
        }
        Ok(t)
    }

    fn table2(&mut self) -> Result<Table> {
        let mut t = Table::new(
            "table2",
            "Question-trained models tested with variant questions: accuracy and Rob (%)",
            &["seed", "model", "tested_with", "split", "acc", "rob"],
        );
        for seed in self.idx.seeds() {
            for mode in self.idx.modes() {
                let Some(q) = self.plain(seed, InputMode::Question, mode) else { continue };
                for split in self.splits.clone() {
                    let orig = self.preds(Some(q), InputMode::Question, split)?;
                    for input in [InputMode::Question].into_iter().chain(VARIANTS) {
                        let var = if input == InputMode::Question {
                            orig.clone()
                        } else {
                            self.preds(Some(q), input, split)?
                        };
                        let acc = fmt_pct(var.as_ref().and_then(|v| accuracy(v).all.pct()));
                        let r = match (&orig, &var, input) {
                            (_, _, InputMode::Question) => "--".to_string(),
                            (Some(o), Some(v), _) => fmt_pct(rob(o, v)?),
                            _ => "NA".to_string(),
                        };
                        t.rows.push(vec![
                            seed.to_string(),
                            mode_name(mode).into(),
                            input.to_string(),
                            split.to_string(),
                            acc,
                            r,
                        ]);
                    }
                }
            }
        }
        Ok(t)
    }

    fn breakdown_row(&mut self, run: Option<&RunEntry>, split: Split) -> Result<[String; 4]> {
        let p = self.preds(run, InputMode::Question, split)?;
        let a = p.as_deref().map(accuracy);
        let f = |g: Option<crate::metrics::GroupStat>| fmt_pct(g.and_then(|g| g.pct()));
        Ok([
            f(a.as_ref().map(|a| a.all)),
            f(a.as_ref().map(|a| a.yes_no)),
            f(a.as_ref().map(|a| a.num)),
            f(a.as_ref().map(|a| a.other)),
        ])
    }

    fn table3(&mut self) -> Result<Table> {
        let mut t = Table::new(
            "table3",
            "Variant-trained models tested with the original question: accuracy (%)",
            &["seed", "model", "trained_with", "split", "all", "yes_no", "num", "other"],
        );
        for seed in self.idx.seeds() {
            for mode in self.idx.modes() {
                for input in [InputMode::Question].into_iter().chain(VARIANTS) {
                    let Some(run) = self.plain(seed, input, mode) else { continue };
                    for split in self.splits.clone() {
                        let cols = self.breakdown_row(Some(run), split)?;
                        let mut row = vec![seed.to_string(), mode_name(mode).into(), input.to_string(), split.to_string()];
                        row.extend(cols);
                        t.rows.push(row);
                    }
                }
            }
        }
        Ok(t)
    }

    fn table4(&mut self) -> Result<Table> {
        let mut t = Table::new(
            "table4",
            "Prediction flips of variant-trained models against the question-trained model on test_ood (%)",
            &["seed", "model", "variant", "c2w", "w2c"],
        );
        for seed in self.idx.seeds() {
            for mode in self.idx.modes() {
                let Some(q) = self.plain(seed, InputMode::Question, mode) else { continue };
                let Some(orig) = self.preds(Some(q), InputMode::Question, Split::TestOod)? else { continue };
                for input in VARIANTS {
                    let Some(run) = self.plain(seed, input, mode) else { continue };
                    let Some(var) = self.preds(Some(run), InputMode::Question, Split::TestOod)? else { continue };
                    let f = flip_ratios(&orig, &var)?;
                    t.rows.push(vec![
                        seed.to_string(),
                        mode_name(mode).into(),
                        input.to_string(),
                        fmt_pct(f.c2w),
                        fmt_pct(f.w2c),
                    ]);
                }
            }
        }
        Ok(t)
    }

    fn table5(&mut self) -> Result<Table> {
        let mut t = Table::new(
            "table5",
            "Question-trained models with debiasing: accuracy (%)",
            &["seed", "model", "method", "split", "all", "yes_no", "num", "other"],
        );
        for seed in self.idx.seeds() {
            for mode in self.idx.modes() {
                for method in [DebiasMethod::None, DebiasMethod::Mixing, DebiasMethod::Contrastive] {
                    let Some(run) = self.idx.find(seed, InputMode::Question, mode, method) else { continue };
                    for split in self.splits.clone() {
                        let cols = self.breakdown_row(Some(run), split)?;
                        let mut row = vec![seed.to_string(), mode_name(mode).into(), method.to_string(), split.to_string()];
                        row.extend(cols);
                        t.rows.push(row);
                    }
                }
            }
        }
        Ok(t)
    }

    fn fig2(&mut self, top_k: usize) -> Result<Table> {
        let mut t = Table::new(
            "fig2",
            "Question types of flipped test_ood predictions, per answer type",
            &["seed", "model", "variant", "direction", "answer_type", "rank", "qtype", "count"],
        );
        for seed in self.idx.seeds() {
            for mode in self.idx.modes() {
                let Some(q) = self.plain(seed, InputMode::Question, mode) else { continue };
                let Some(orig) = self.preds(Some(q), InputMode::Question, Split::TestOod)? else { continue };
                for input in VARIANTS {
                    let Some(run) = self.plain(seed, input, mode) else { continue };
                    let Some(var) = self.preds(Some(run), InputMode::Question, Split::TestOod)? else { continue };
                    let b = flip_breakdown(&orig, &var, top_k)?;
                    for (dir, hist) in [("w2c", &b.w2c), ("c2w", &b.c2w)] {
                        for at in AnswerType::ALL {
                            for (rank, (qtype, n)) in hist.get(&at).into_iter().flatten().enumerate() {
                                t.rows.push(vec![
                                    seed.to_string(),
                                    mode_name(mode).into(),
                                    input.to_string(),
                                    dir.into(),
                                    at.to_string(),
                                    (rank + 1).to_string(),
                                    qtype.clone(),
                                    n.to_string(),
                                ]);
                            }
                        }
                    }
                }
            }
        }
        Ok(t)
    }

    fn encoder_tables(&mut self) -> Result<(Table, Table, Table)> {
        let mut att = Table::new(
            "attention",
            "Mean token attention on question-type words, original questions of test_ood",
            &["seed", "cell", "train_input", "model", "method", "prefix_attention"],
        );
        let mut sim = Table::new(
            "simi",
            "simi between original and variant question encodings on test_ood (0 = identical)",
            &["seed", "cell", "train_input", "model", "method", "simi1", "simi2", "simi3"],
        );
        let mut words = Table::new(
            "attention_examples",
            "Word attention for the first test_ood question of each question type",
            &["seed", "cell", "question_id", "qtype", "position", "word", "weight"],
        );
        let mut runs: Vec<&'a RunEntry> = self.idx.runs.iter().collect();
        runs.sort_by_key(|r| r.record.seed);
        for run in runs {
            let Some(a) = run.analysis()? else {
                self.missing
                    .push(format!("{}/seed{}: analysis.json", run.record.cell, run.record.seed));
                continue;
            };
            let lead = vec![
                run.record.seed.to_string(),
                run.record.cell.clone(),
                run.record.train.train_input.to_string(),
                mode_name(run.mode()).into(),
                run.method().to_string(),
            ];
            let mut row = lead.clone();
            row.push(format!("{:.4}", a.prefix_attention));
            att.rows.push(row);
            let mut row = lead;
            row.extend(a.simi.iter().map(|(_, v)| format!("{v:.4}")));
            sim.rows.push(row);
            for ex in &a.examples {
                for (pos, (w, weight)) in ex.weights.iter().enumerate() {
                    words.rows.push(vec![
                        run.record.seed.to_string(),
                        run.record.cell.clone(),
                        ex.question_id.to_string(),
                        ex.qtype.clone(),
                        pos.to_string(),
                        w.clone(),
                        format!("{weight:.4}"),
                    ]);
                }
            }
        }
        Ok((att, sim, words))
    }
}

pub fn build_report(runs: &[RunEntry], top_k: usize) -> Result<Report> {
    let splits = {
        let mut s: Vec<Split> = runs.iter().flat_map(|r| r.record.eval_splits.iter().copied()).collect();
        s.sort_unstable();
        s.dedup();
        s
    };
    let mut b = Builder {
        idx: Index { runs },
        splits,
        missing: Vec::new(),
    };
    let mut tables = vec![b.table1()?, b.table2()?, b.table3()?, b.table4()?, b.table5()?, b.fig2(top_k)?];
    let (att, sim, words) = b.encoder_tables()?;
    tables.extend([att, sim, words]);
    let mut missing = b.missing;
    missing.sort();
    missing.dedup();
    Ok(Report { tables, missing })
}

/// Human-readable rendering of the whole report.
pub fn render_text(report: &Report) -> String {
    let mut out = String::new();
    for t in &report.tables {
        if t.name == "attention_examples" {
            continue;
        }
        out.push_str(&t.to_text());
        out.push('\n');
    }
    if !report.missing.is_empty() {
        let _ = writeln!(out, "missing outputs");
        for m in &report.missing {
            let _ = writeln!(out, "  {m}");
        }
    }
    out
}

/// Writes `<name>.csv` for every table and `report.txt` into `dir`. Returns
/// the written paths.
pub fn write_report(report: &Report, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for t in &report.tables {
        let p = dir.join(format!("{}.csv", t.name));
        io::write_atomic(&p, &t.to_csv()?)?;
        written.push(p);
    }
    let p = dir.join("report.txt");
    io::write_atomic(&p, render_text(report).as_bytes())?;
    written.push(p);
    Ok(written)
}

/// Per-table row counts, handy for logs.
pub fn summary(report: &Report) -> BTreeMap<String, usize> {
    report.tables.iter().map(|t| (t.name.clone(), t.rows.len())).collect()
}
