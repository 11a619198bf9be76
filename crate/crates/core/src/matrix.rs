//! Experiment recipes: a generator config, a list of training cells and the
//! seeds to run them on.
//!
//! Layout under the output directory:
//!
//! ```text
//! data/seed<s>/...                 generated benchmark
//! runs/<cell>/seed<s>/cell.json    what was trained
//! runs/<cell>/seed<s>/model.json   checkpoint
//! runs/<cell>/seed<s>/loss.json    mean loss per epoch
//! runs/<cell>/seed<s>/analysis.json
//! runs/<cell>/seed<s>/pred_<input>_<split>.jsonl
//! ```

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::debias::DebiasConfig;
use crate::error::{Error, Result};
use crate::io;
use crate::model::ModelMode;
use crate::synthgen::{generate, BiasConfig, Dataset, Split};
use crate::trainer::{self, analyze, InputMode, RunConfig, TrainConfig};

/// One training configuration of the matrix. Unset fields inherit from the
/// recipe's `train` section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellSpec {
    pub name: String,
    #[serde(default = "default_input")]
    pub train_input: InputMode,
    #[serde(default)]
    pub model_mode: Option<ModelMode>,
    #[serde(default)]
    pub debias: Option<DebiasConfig>,
    #[serde(default)]
    pub epochs: Option<usize>,
    #[serde(default = "trainer::default_eval_inputs")]
    pub eval_inputs: Vec<InputMode>,
}

fn default_input() -> InputMode {
    InputMode::Question
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportSpec {
    #[serde(default = "default_top_k")]
    pub top_k: usize,
}

fn default_top_k() -> usize {
    10
}

impl Default for ReportSpec {
    fn default() -> Self {
        Self {
            top_k: default_top_k(),
        }
    }
}

/// A file that fully determines an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Recipe {
    pub name: String,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    /// Data seeds; each seed also seeds every training run on that data.
    pub seeds: Vec<u64>,
    pub generator: BiasConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default = "trainer::default_eval_splits")]
    pub eval_splits: Vec<Split>,
    #[serde(default, rename = "cell")]
    pub cells: Vec<CellSpec>,
    #[serde(default)]
    pub report: ReportSpec,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

impl Recipe {
    pub fn load(path: &Path) -> Result<Self> {
        let r: Recipe = crate::config::load(path)?;
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("recipe needs at least one seed".into()));
        }
        let mut names = std::collections::BTreeSet::new();
        for c in &self.cells {
            if c.name.is_empty() || c.name.contains(['/', '\\']) || c.name.starts_with('.') {
                return Err(Error::Config(format!("bad cell name {:?}", c.name)));
            }
            if !names.insert(&c.name) {
                return Err(Error::Config(format!("duplicate cell {:?}", c.name)));
            }
            if c.eval_inputs.is_empty() {
                return Err(Error::Config(format!("cell {:?} has no eval inputs", c.name)));
            }
        }
        for &seed in &self.seeds {
            for c in &self.cells {
                self.train_config(c, seed).validate()?;
            }
        }
        Ok(())
    }

    pub fn data_config(&self, seed: u64) -> BiasConfig {
        BiasConfig {
            seed,
            ..self.generator.clone()
        }
    }

    pub fn train_config(&self, cell: &CellSpec, seed: u64) -> TrainConfig {
        let mut t = self.train.clone();
        t.seed = seed;
        t.train_input = cell.train_input;
        if let Some(m) = cell.model_mode {
            t.model_mode = m;
        }
        if let Some(d) = &cell.debias {
            t.debias = d.clone();
        }
        if let Some(e) = cell.epochs {
            t.epochs = e;
        }
        t
    }

    pub fn data_dir(&self, seed: u64) -> PathBuf {
        self.output_dir.join("data").join(format!("seed{seed}"))
    }

    pub fn run_dir(&self, cell: &str, seed: u64) -> PathBuf {
        self.output_dir.join("runs").join(cell).join(format!("seed{seed}"))
    }
}

/// Written next to every run so reports can be rebuilt from the directory
/// tree alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub cell: String,
    pub seed: u64,
    pub train: TrainConfig,
    pub eval_inputs: Vec<InputMode>,
    pub eval_splits: Vec<Split>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellOutcome {
    pub cell: String,
    pub seed: u64,
    pub config_sha256: String,
    pub error: Option<String>,
    pub wall_seconds: f64,
}

pub fn sha256_json<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("serializable");
    hex::encode(Sha256::digest(&bytes))
}

/// Generates (or reuses) the benchmark for `seed`.
pub fn ensure_data(recipe: &Recipe, seed: u64) -> Result<Dataset> {
    let dir = recipe.data_dir(seed);
    let cfg = recipe.data_config(seed);
    let stamp = dir.join("config.json");
    if stamp.exists() {
        let saved: BiasConfig = io::read_json(&stamp)?;
        if saved == cfg {
            return Dataset::load(&dir);
        }
    }
    let data = generate(&cfg)?;
    data.save(&dir)?;
    io::write_json(&stamp, &cfg)?;
    Ok(data)
}

fn run_cell(recipe: &Recipe, cell: &CellSpec, seed: u64, data: &Dataset) -> Result<()> {
    let train = recipe.train_config(cell, seed);
    let out_dir = recipe.run_dir(&cell.name, seed);
    let record = CellRecord {
        cell: cell.name.clone(),
        seed,
        train: train.clone(),
        eval_inputs: cell.eval_inputs.clone(),
        eval_splits: recipe.eval_splits.clone(),
    };
    io::write_json(&out_dir.join("cell.json"), &record)?;
    let run = RunConfig {
        name: cell.name.clone(),
        data_dir: recipe.data_dir(seed),
        out_dir: out_dir.clone(),
        train,
        eval_inputs: cell.eval_inputs.clone(),
        eval_splits: recipe.eval_splits.clone(),
    };
    let outcome = trainer::run(&run, data)?;
    let analysis = analyze(&outcome.model, &data.test_ood, Split::TestOod)?;
    io::write_json(&out_dir.join("analysis.json"), &analysis)
}

/// Runs every cell of `recipe` on every seed using `jobs` worker threads.
/// A failing cell is recorded in its outcome and the rest still run.
pub fn run_matrix(recipe: &Recipe, jobs: usize, log: &(dyn Fn(&str) + Sync)) -> Result<Vec<CellOutcome>> {
    recipe.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let mut outcomes = Vec::new();
    for &seed in &recipe.seeds {
        let t = Instant::now();
        let data = ensure_data(recipe, seed)?;
        log(&format!(
            "event=data seed={seed} train={} test_id={} test_ood={} seconds={:.1}",
            data.train.len(),
            data.test_id.len(),
            data.test_ood.len(),
            t.elapsed().as_secs_f64()
        ));
        let batch: Vec<CellOutcome> = pool.install(|| {
            recipe
                .cells
                .par_iter()
                .map(|cell| {
                    let t = Instant::now();
                    let cfg = (recipe.data_config(seed), recipe.train_config(cell, seed));
                    let result = run_cell(recipe, cell, seed, &data);
                    let outcome = CellOutcome {
                        cell: cell.name.clone(),
                        seed,
                        config_sha256: sha256_json(&cfg),
                        error: result.err().map(|e| e.to_string()),
                        wall_seconds: t.elapsed().as_secs_f64(),
                    };
                    log(&format!(
                        "event=cell cell={} seed={seed} status={} seconds={:.1}",
                        cell.name,
                        if outcome.error.is_none() { "ok" } else { "failed" },
                        outcome.wall_seconds
                    ));
                    outcome
                })
                .collect()
        });
        outcomes.extend(batch);
    }
    Ok(outcomes)
}
