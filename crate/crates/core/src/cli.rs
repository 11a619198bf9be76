//! Command-line entry point.
//!
//! Every command logs `key=value` lines to stderr. Exit status is 0 when
//! every requested artifact was written, 2 for usage or configuration
//! errors and 1 for anything that failed at run time.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::Value;

use crate::debias::{DebiasConfig, DebiasMethod};
use crate::error::{Error, Result};
use crate::io;
use crate::matrix::{self, CellOutcome, CellRecord, Recipe};
use crate::model::{Model, ModelMode};
use crate::perturb::{self, VariantKind};
use crate::question::{QTypeLexicon, Question};
use crate::report;
use crate::synthgen::{generate, BiasConfig, Dataset, Split, World};
use crate::trainer::{self, analyze, InputMode, RunConfig, TrainConfig};

#[derive(Debug, Parser)]
#[command(name = "qbias", version, about = "Question-bias probes on a synthetic VQA benchmark")]
pub struct Cli {
    /// Root directory for generated data, runs and reports.
    #[arg(long, global = true, env = "QBIAS_OUTPUT_DIR", default_value = "out")]
    pub output_dir: PathBuf,
    /// Overrides every seed taken from config files.
    #[arg(long, global = true, env = "QBIAS_SEED")]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the synthetic benchmark into <output-dir>/data.
    Generate {
        /// Generator config (TOML or JSON); defaults are used when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Rewrite question text as one of its variants.
    Morph(MorphArgs),
    /// Train one model on <output-dir>/data and evaluate it.
    Train(TrainArgs),
    /// Evaluate a checkpoint on one split.
    Eval(EvalArgs),
    /// Build tables from every run under <output-dir>/runs.
    Report {
        /// Where the CSV and text tables go [default: <output-dir>/report].
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        top_k: usize,
    },
    /// Run every cell of a recipe without reporting.
    Matrix(RecipeArgs),
    /// Run a recipe end to end: data, training cells, reports, manifest.
    Reproduce(RecipeArgs),
    /// Configuration helpers.
    Config {
        #[command(subcommand)]
        action: ConfigAction,
    },
}

#[derive(Debug, Subcommand)]
pub enum ConfigAction {
    /// Print the default configuration of one kind as TOML.
    Show {
        #[arg(value_enum, default_value_t = ConfigKind::Generator)]
        kind: ConfigKind,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ConfigKind {
    Generator,
    Train,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MorphFormat {
    /// one JSON object per line with a "question" field
    Jsonl,
    /// a VQA questions file: {"questions": [...]}
    Vqa,
}

#[derive(Debug, Args)]
pub struct MorphArgs {
    /// 0 (identity), 1 (swap prefix and postfix), 2 (shuffle) or 3 (reverse).
    #[arg(long)]
    pub variant: VariantKind,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, value_enum, default_value_t = MorphFormat::Jsonl)]
    pub format: MorphFormat,
    /// Question-type lexicon (phrase<TAB>answer type per line); the synthetic
    /// benchmark's lexicon by default.
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Base training config (TOML or JSON); flags below override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Input rendering used for training.
    #[arg(long)]
    pub mode: Option<InputMode>,
    #[arg(long, value_enum)]
    pub model_mode: Option<ModelModeArg>,
    #[arg(long)]
    pub debias: Option<DebiasMethod>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Run name [default: the training input].
    #[arg(long)]
    pub name: Option<String>,
    /// Comma-separated evaluation inputs.
    #[arg(long, value_delimiter = ',', default_value = "question")]
    pub eval_inputs: Vec<InputMode>,
    /// Benchmark directory [default: <output-dir>/data].
    #[arg(long)]
    pub data: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModelModeArg {
    Full,
    QOnly,
}

impl From<ModelModeArg> for ModelMode {
    fn from(m: ModelModeArg) -> Self {
        match m {
            ModelModeArg::Full => ModelMode::Full,
            ModelModeArg::QOnly => ModelMode::QOnly,
        }
    }
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Benchmark directory [default: <output-dir>/data].
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, default_value = "test_ood")]
    pub split: Split,
    #[arg(long, default_value = "question")]
    pub input: InputMode,
    /// Prediction dump to write.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RecipeArgs {
    pub recipe: PathBuf,
    /// Matrix cells trained concurrently.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

fn log(line: &str) {
    eprintln!("{line}");
}

/// Parses `args` and runs the command, returning the process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            log(&format!("event=error kind={} message={:?}", if e.is_usage() { "usage" } else { "runtime" }, e.to_string()));
            if e.is_usage() {
                2
            } else {
                1
            }
        }
    }
}

pub fn main() -> i32 {
    main_with_args(std::env::args_os())
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Generate { config } => cmd_generate(cli, config.as_deref()),
        Command::Morph(a) => cmd_morph(cli, a),
        Command::Train(a) => cmd_train(cli, a),
        Command::Eval(a) => cmd_eval(cli, a),
        Command::Report { out, top_k } => cmd_report(cli, out.as_deref(), *top_k).map(|_| ()),
        Command::Matrix(a) => cmd_matrix(cli, a).map(|_| ()),
        Command::Reproduce(a) => cmd_reproduce(cli, a),
        Command::Config { action: ConfigAction::Show { kind } } => {
            let text = match kind {
                ConfigKind::Generator => to_toml(&BiasConfig::default())?,
                ConfigKind::Train => to_toml(&TrainConfig::default())?,
            };
            print!("{text}");
            Ok(())
        }
    }
}

fn to_toml<T: Serialize>(v: &T) -> Result<String> {
    toml::to_string_pretty(v).map_err(|e| Error::Config(e.to_string()))
}

fn data_dir(cli: &Cli) -> PathBuf {
    cli.output_dir.join("data")
}

fn cmd_generate(cli: &Cli, config: Option<&Path>) -> Result<()> {
    let mut cfg: BiasConfig = match config {
        Some(p) => crate::config::load(p)?,
        None => BiasConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    let t = Instant::now();
    let data = generate(&cfg)?;
    let dir = data_dir(cli);
    data.save(&dir)?;
    io::write_json(&dir.join("config.json"), &cfg)?;
    log(&format!(
        "event=generate dir={} seed={} train={} test_id={} test_ood={} seconds={:.2}",
        dir.display(),
        cfg.seed,
        data.train.len(),
        data.test_id.len(),
        data.test_ood.len(),
        t.elapsed().as_secs_f64()
    ));
    Ok(())
}

/// Text of `question` rewritten as `kind`, keeping a terminal question mark.
pub fn morph_text(text: &str, kind: VariantKind, lex: &QTypeLexicon, id: u64, qtype: Option<&str>) -> Result<String> {
    let q = Question::parse(id, text, lex, qtype, None)?;
    let tokens = perturb::apply(kind, &q, 0);
    Ok(crate::question::render_tokens(&tokens, q.question_mark))
}

fn morph_value(v: &mut Value, kind: VariantKind, lex: &QTypeLexicon) -> Result<()> {
    let obj = v
        .as_object_mut()
        .ok_or_else(|| Error::InvalidQuestion("question record is not an object".into()))?;
    let id = obj.get("question_id").and_then(Value::as_u64).unwrap_or(0);
    let qtype = obj.get("question_type").and_then(Value::as_str).map(str::to_string);
    let text = obj
        .get("question")
        .and_then(Value::as_str)
        .ok_or_else(|| Error::InvalidQuestion(format!("question {id} has no text")))?;
    let out = morph_text(text, kind, lex, id, qtype.as_deref())?;
    obj.insert("question".into(), Value::String(out));
    Ok(())
}

fn cmd_morph(_cli: &Cli, a: &MorphArgs) -> Result<()> {
    let lex = match &a.lexicon {
        Some(p) => QTypeLexicon::load(p)?,
        None => World::new(&BiasConfig::default()).lexicon(),
    };
    let n = match a.format {
        MorphFormat::Jsonl => {
            let mut records: Vec<Value> = io::read_jsonl(&a.input)?;
            for r in &mut records {
                morph_value(r, a.variant, &lex)?;
            }
            io::write_jsonl(&a.output, &records)?;
            records.len()
        }
        MorphFormat::Vqa => {
            let mut doc: Value = io::read_json(&a.input)?;
            let qs = doc
                .get_mut("questions")
                .and_then(Value::as_array_mut)
                .ok_or_else(|| Error::Parse {
                    path: a.input.clone(),
                    line: 0,
                    msg: "no \"questions\" array".into(),
                })?;
            for q in qs.iter_mut() {
                morph_value(q, a.variant, &lex)?;
            }
            let n = qs.len();
            io::write_json(&a.output, &doc)?;
            n
        }
    };
    log(&format!("event=morph variant={} questions={n} output={}", a.variant, a.output.display()));
    Ok(())
}

fn cmd_train(cli: &Cli, a: &TrainArgs) -> Result<()> {
    let mut cfg: TrainConfig = match &a.config {
        Some(p) => crate::config::load(p)?,
        None => TrainConfig::default(),
    };
    if let Some(m) = a.mode {
        cfg.train_input = m;
    }
    if let Some(m) = a.model_mode {
        cfg.model_mode = m.into();
    }
    if a.debias.is_some() || a.alpha.is_some() || a.lambda.is_some() {
        let d = &mut cfg.debias;
        if let Some(m) = a.debias {
            *d = DebiasConfig {
                method: m,
                ..d.clone()
            };
        }
        if let Some(x) = a.alpha {
            d.alpha = x;
        }
        if let Some(x) = a.lambda {
            d.lambda = x;
        }
    }
    if let Some(e) = a.epochs {
        cfg.epochs = e;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    let name = a.name.clone().unwrap_or_else(|| cfg.train_input.to_string());
    let data_dir = a.data.clone().unwrap_or_else(|| data_dir(cli));
    let data = Dataset::load(&data_dir)?;
    let out_dir = cli.output_dir.join("runs").join(&name).join(format!("seed{}", cfg.seed));
    let splits = trainer::default_eval_splits();
    io::write_json(
        &out_dir.join("cell.json"),
        &CellRecord {
            cell: name.clone(),
            seed: cfg.seed,
            train: cfg.clone(),
            eval_inputs: a.eval_inputs.clone(),
            eval_splits: splits.clone(),
        },
    )?;
    let run = RunConfig {
        name: name.clone(),
        data_dir,
        out_dir: out_dir.clone(),
        train: cfg,
        eval_inputs: a.eval_inputs.clone(),
        eval_splits: splits,
    };
    let t = Instant::now();
    let outcome = trainer::run(&run, &data)?;
    let analysis = analyze(&outcome.model, &data.test_ood, Split::TestOod)?;
    io::write_json(&out_dir.join("analysis.json"), &analysis)?;
    for (epoch, loss) in outcome.loss_log.iter().enumerate() {
        log(&format!("event=epoch run={name} epoch={} loss={loss:.6}", epoch + 1));
    }
    log(&format!(
        "event=train run={name} dir={} seconds={:.2}",
        out_dir.display(),
        t.elapsed().as_secs_f64()
    ));
    Ok(())
}

fn cmd_eval(cli: &Cli, a: &EvalArgs) -> Result<()> {
    let model = Model::<f64>::load(&a.model)?;
    let data = Dataset::load(&a.data.clone().unwrap_or_else(|| data_dir(cli)))?;
    if model.answers != data.answers {
        return Err(Error::Model("checkpoint answer vocabulary does not match the data".into()));
    }
    let records = trainer::evaluate(&model, data.split(a.split), a.input)?;
    io::write_jsonl(&a.out, &records)?;
    let acc = crate::metrics::accuracy(&records);
    log(&format!(
        "event=eval split={} input={} n={} acc={}",
        a.split,
        a.input,
        records.len(),
        crate::metrics::fmt_pct(acc.all.pct())
    ));
    Ok(())
}

fn cmd_report(cli: &Cli, out: Option<&Path>, top_k: usize) -> Result<Vec<PathBuf>> {
    let runs = report::collect_runs(&cli.output_dir)?;
    let rep = report::build_report(&runs, top_k)?;
    let dir = out.map_or_else(|| cli.output_dir.join("report"), Path::to_path_buf);
    let written = report::write_report(&rep, &dir)?;
    let counts: Vec<String> = report::summary(&rep).iter().map(|(k, v)| format!("{k}={v}")).collect();
    log(&format!("event=report dir={} runs={} {}", dir.display(), runs.len(), counts.join(" ")));
    Ok(written)
}

fn load_recipe(cli: &Cli, a: &RecipeArgs) -> Result<Recipe> {
    let mut r = Recipe::load(&a.recipe)?;
    if let Some(s) = cli.seed {
        r.seeds = vec![s];
    }
    // an explicit flag or env var wins over the recipe's own directory
    if std::env::var_os("QBIAS_OUTPUT_DIR").is_some() || cli.output_dir != Path::new("out") {
        r.output_dir = cli.output_dir.clone();
    }
    Ok(r)
}

fn cmd_matrix(cli: &Cli, a: &RecipeArgs) -> Result<(Recipe, Vec<CellOutcome>)> {
    let recipe = load_recipe(cli, a)?;
    let outcomes = matrix::run_matrix(&recipe, a.jobs, &log)?;
    Ok((recipe, outcomes))
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    recipe: &'a str,
    recipe_sha256: String,
    seeds: &'a [u64],
    cells: &'a [CellOutcome],
    reports: Vec<String>,
    total_seconds: f64,
}

fn cmd_reproduce(cli: &Cli, a: &RecipeArgs) -> Result<()> {
    let t = Instant::now();
    let (recipe, outcomes) = cmd_matrix(cli, a)?;
    let report_cli = Cli {
        output_dir: recipe.output_dir.clone(),
        seed: cli.seed,
        command: Command::Report {
            out: None,
            top_k: recipe.report.top_k,
        },
    };
    let written = cmd_report(&report_cli, None, recipe.report.top_k)?;
    let manifest = Manifest {
        recipe: &recipe.name,
        recipe_sha256: matrix::sha256_json(&recipe),
        seeds: &recipe.seeds,
        cells: &outcomes,
        reports: written
            .iter()
            .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
            .collect(),
        total_seconds: t.elapsed().as_secs_f64(),
    };
    io::write_json(&recipe.output_dir.join("manifest.json"), &manifest)?;
    let failed: Vec<String> = outcomes
        .iter()
        .filter(|o| o.error.is_some())
        .map(|o| format!("{}/seed{}", o.cell, o.seed))
        .collect();
    log(&format!(
        "event=reproduce recipe={} cells={} failed={} seconds={:.1}",
        recipe.name,
        outcomes.len(),
        failed.len(),
        t.elapsed().as_secs_f64()
    ));
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Error::Model(format!("failed cells: {}", failed.join(", "))))
    }
}
