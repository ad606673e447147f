//! Command-line entry point.
//!
//! Exit codes: 0 on success, 1 when input data is missing or malformed,
//! 2 on usage errors. Errors go to standard error prefixed with `error:`.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::config::RunConfig;
use crate::dataset::{parse_dataset, TrainingExample};
use crate::embed::{init_parameters, load_pretrained, ExactMatch, KeyedVectors, LazyEncoded, ParameterSet};
use crate::gradcheck::check_gradients;
use crate::kb::{parse_goal, KnowledgeBase};
use crate::model::{load_model, save_model};
use crate::oracle::{classical_reduction, pruning_soundness};
use crate::prover::{explain, prove, Aggregator};
use crate::synthetic::{generate, SyntheticConfig};
use crate::templates::{default_templates, parse_templates, RuleTemplate};
use crate::train::{evaluate, prepare, train, TrainLog};

/// Prints to standard output, ignoring write errors such as a closed pipe.
macro_rules! out {
    ($($arg:tt)*) => {{
        let _ = write!(std::io::stdout().lock(), $($arg)*);
    }};
}

macro_rules! outln {
    ($($arg:tt)*) => {{
        let _ = writeln!(std::io::stdout().lock(), $($arg)*);
    }};
}

/// Largest relative gradient error `check-grad` accepts.
pub const GRAD_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Parser)]
#[command(name = "weaklog", version, about = "Differentiable weak-unification Datalog prover")]
struct Cli {
    /// TOML run configuration. Flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Threads for candidate scoring.
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Instantiate templates, train, and save the model and metrics.
    Train(TrainArgs),
    /// Score a dataset with a saved model.
    Eval(EvalArgs),
    /// Prove one goal and print the best proof.
    Prove(ProveArgs),
    /// Compare tape gradients with finite differences.
    CheckGrad(CheckArgs),
    /// Compare the prover with reference oracles on random programs.
    Selftest(SelftestArgs),
    /// Write the synthetic two-hop task.
    GenSynthetic(GenArgs),
}

#[derive(Debug, Args)]
struct DataArgs {
    /// Facts as subject, pattern, object TSV.
    #[arg(long, value_name = "FILE")]
    triples: Option<PathBuf>,
    /// Pretrained pattern vectors.
    #[arg(long, value_name = "FILE")]
    vectors: Option<PathBuf>,
    /// Extra facts and rules in program syntax.
    #[arg(long, value_name = "FILE")]
    rules: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Unification threshold.
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    max_depth: Option<u32>,
    #[arg(long, value_parser = parse_aggregator)]
    aggregator: Option<Aggregator>,
}

fn parse_aggregator(s: &str) -> Result<Aggregator, String> {
    s.parse()
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Training examples as JSON Lines.
    #[arg(long, value_name = "FILE")]
    dataset: Option<PathBuf>,
    /// Examples evaluated after training.
    #[arg(long, value_name = "FILE")]
    heldout: Option<PathBuf>,
    /// Rule templates; the built-in set is used otherwise.
    #[arg(long, value_name = "FILE")]
    templates: Option<PathBuf>,
    /// Output directory for the model and `metrics.json`.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<u32>,
    #[arg(long)]
    learning_rate: Option<f64>,
    /// Copies of each built-in template.
    #[arg(long)]
    template_copies: Option<u32>,
    /// Train without rules.
    #[arg(long)]
    no_rules: bool,
    /// Use raw entity rows without an MLP.
    #[arg(long)]
    no_entity_mlp: bool,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_name = "FILE")]
    dataset: Option<PathBuf>,
    /// Directory written by `train`.
    #[arg(long, value_name = "DIR")]
    model: Option<PathBuf>,
    /// Output directory for `predictions.jsonl` and `eval.json`.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    #[arg(long)]
    no_rules: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SimilarityKind {
    /// Symbols unify only with themselves.
    Exact,
    /// Embedding similarity from a model or a fresh initialisation.
    Embedding,
}

#[derive(Debug, Args)]
struct ProveArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Goal such as `country(athens, X)`.
    #[arg(long)]
    goal: String,
    /// Defaults to `embedding` when a model is given and `exact` otherwise.
    #[arg(long, value_enum)]
    similarity: Option<SimilarityKind>,
    #[arg(long, value_name = "DIR")]
    model: Option<PathBuf>,
    /// Also write the DOT rendering to this file.
    #[arg(long, value_name = "FILE")]
    dot: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CheckArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    tapes: usize,
}

#[derive(Debug, Args)]
struct SelftestArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Random programs per check.
    #[arg(long, default_value_t = 200)]
    programs: usize,
}

#[derive(Debug, Args)]
struct GenArgs {
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    train_examples: Option<usize>,
    #[arg(long)]
    heldout_examples: Option<usize>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    noise: Option<f64>,
    /// Do not force the country a person lives in among the candidates.
    #[arg(long)]
    no_distractor: bool,
}

enum Failure {
    Usage(String),
    Data(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Data(e)
    }
}

fn usage<T>(msg: impl Into<String>) -> Result<T, Failure> {
    Err(Failure::Usage(msg.into()))
}

/// Parses `argv` (including the program name), runs the subcommand and
/// returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            2
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

fn base_config(cli: &Cli) -> Result<RunConfig, Failure> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p).map_err(|e| Failure::Data(e.into()))?,
        None => RunConfig::default(),
    };
    if let Some(j) = cli.jobs {
        cfg.jobs = j;
    }
    Ok(cfg)
}

fn apply_data(cfg: &mut RunConfig, d: &DataArgs) {
    let p = &mut cfg.paths;
    for (dst, src) in [(&mut p.triples, &d.triples), (&mut p.vectors, &d.vectors), (&mut p.rules, &d.rules)] {
        if src.is_some() {
            dst.clone_from(src);
        }
    }
    if let Some(s) = d.seed {
        cfg.seed = s;
    }
    if let Some(t) = d.threshold {
        cfg.prover.threshold = t;
    }
    if let Some(m) = d.max_depth {
        cfg.prover.max_depth = m;
    }
    if let Some(a) = d.aggregator {
        cfg.prover.aggregator = a;
    }
}

fn set_path(dst: &mut Option<PathBuf>, src: &Option<PathBuf>) {
    if src.is_some() {
        dst.clone_from(src);
    }
}

fn validated(cfg: RunConfig) -> Result<RunConfig, Failure> {
    cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    Ok(cfg)
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    let mut cfg = base_config(&cli)?;
    match cli.command {
        Command::Train(a) => {
            apply_data(&mut cfg, &a.data);
            set_path(&mut cfg.paths.dataset, &a.dataset);
            set_path(&mut cfg.paths.heldout, &a.heldout);
            set_path(&mut cfg.paths.templates, &a.templates);
            set_path(&mut cfg.paths.output, &a.out);
            if let Some(e) = a.epochs {
                cfg.train.epochs = e;
            }
            if let Some(lr) = a.learning_rate {
                cfg.train.adam.learning_rate = lr;
            }
            if let Some(c) = a.template_copies {
                cfg.train.template_copies = c;
            }
            cfg.train.no_rules |= a.no_rules;
            cfg.train.no_entity_mlp |= a.no_entity_mlp;
            cmd_train(&validated(cfg)?)
        }
        Command::Eval(a) => {
            apply_data(&mut cfg, &a.data);
            set_path(&mut cfg.paths.dataset, &a.dataset);
            set_path(&mut cfg.paths.model, &a.model);
            set_path(&mut cfg.paths.output, &a.out);
            cfg.train.no_rules |= a.no_rules;
            cmd_eval(&validated(cfg)?)
        }
        Command::Prove(a) => {
            apply_data(&mut cfg, &a.data);
            set_path(&mut cfg.paths.model, &a.model);
            let kind = a.similarity.unwrap_or(if cfg.paths.model.is_some() {
                SimilarityKind::Embedding
            } else {
                SimilarityKind::Exact
            });
            cmd_prove(&validated(cfg)?, &a.goal, kind, a.dot.as_deref())
        }
        Command::CheckGrad(a) => cmd_check_grad(a.tapes, a.seed),
        Command::Selftest(a) => cmd_selftest(a.programs, a.seed),
        Command::GenSynthetic(a) => {
            let d = SyntheticConfig::default();
            let s = SyntheticConfig {
                seed: a.seed,
                train_examples: a.train_examples.unwrap_or(d.train_examples),
                heldout_examples: a.heldout_examples.unwrap_or(d.heldout_examples),
                dim: a.dim.unwrap_or(d.dim),
                noise: a.noise.unwrap_or(d.noise),
                distractor: !a.no_distractor,
                ..d
            };
            if s.dim == 0 {
                return usage("--dim must be at least 1");
            }
            generate(&s).write_to(&a.out).with_context(|| format!("cannot write {}", a.out.display()))?;
            outln!("wrote {}", a.out.display());
            Ok(())
        }
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    let f = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    Ok(BufReader::new(f))
}

fn required<'a>(p: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path, Failure> {
    match p {
        Some(p) => Ok(p),
        None => usage(format!("--{flag} is required (or set it under [paths])")),
    }
}

/// Knowledge base from the configured triple and program files, and the
/// pretrained vectors if configured.
pub fn load_kb(cfg: &RunConfig) -> Result<(KnowledgeBase, Option<KeyedVectors>)> {
    let mut kb = KnowledgeBase::new();
    if let Some(p) = &cfg.paths.triples {
        kb.extend_triples(open(p)?).with_context(|| p.display().to_string())?;
    }
    if let Some(p) = &cfg.paths.rules {
        let text = std::fs::read_to_string(p).with_context(|| format!("cannot open {}", p.display()))?;
        kb.extend_program(&text).with_context(|| p.display().to_string())?;
    }
    let vectors = match &cfg.paths.vectors {
        Some(p) => Some(load_pretrained(open(p)?).with_context(|| p.display().to_string())?),
        None => None,
    };
    Ok((kb, vectors))
}

pub fn load_examples(path: &Path, kb: &mut KnowledgeBase) -> Result<Vec<TrainingExample>> {
    parse_dataset(open(path)?, &mut kb.symbols).with_context(|| path.display().to_string())
}

fn templates(cfg: &RunConfig) -> Result<Vec<RuleTemplate>> {
    match &cfg.paths.templates {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("cannot open {}", p.display()))?;
            parse_templates(&text).with_context(|| p.display().to_string())
        }
        None => Ok(default_templates(cfg.train.template_copies)),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainMetrics {
    pub config: RunConfig,
    pub train_examples: usize,
    pub rules: usize,
    pub log: TrainLog,
    /// Accuracy on the training set after the last epoch.
    pub train_accuracy: f64,
    pub heldout_examples: usize,
    pub heldout_accuracy: Option<f64>,
}

impl TrainMetrics {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("metrics serialise") + "\n"
    }
}

pub struct Trained {
    pub kb: KnowledgeBase,
    pub params: ParameterSet,
    pub metrics: TrainMetrics,
}

/// Loads the configured inputs, trains and evaluates.
pub fn train_model(cfg: &RunConfig) -> Result<Trained> {
    let (mut kb, vectors) = load_kb(cfg)?;
    let vectors = vectors.context("training needs pretrained vectors (--vectors)")?;
    let dataset_path = cfg.paths.dataset.as_deref().context("training needs a dataset (--dataset)")?;
    let dataset = load_examples(dataset_path, &mut kb)?;
    let heldout = match &cfg.paths.heldout {
        Some(p) => Some(load_examples(p, &mut kb)?),
        None => None,
    };
    let tcfg = cfg.train_config();
    let mut params = prepare(&mut kb, &dataset, &vectors, &templates(cfg)?, &cfg.init, &tcfg)?;
    let log = train(&dataset, &kb, &mut params, &tcfg);
    let train_accuracy = evaluate(&dataset, &kb, &params, &tcfg).accuracy;
    let heldout_accuracy = heldout.as_ref().map(|h| evaluate(h, &kb, &params, &tcfg).accuracy);
    let metrics = TrainMetrics {
        config: cfg.clone(),
        train_examples: dataset.len(),
        rules: kb.rules.len(),
        log,
        train_accuracy,
        heldout_examples: heldout.as_ref().map_or(0, Vec::len),
        heldout_accuracy,
    };
    Ok(Trained { kb, params, metrics })
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).with_context(|| format!("cannot write {}", path.display()))
}

fn cmd_train(cfg: &RunConfig) -> Result<(), Failure> {
    required(&cfg.paths.triples, "triples")?;
    required(&cfg.paths.vectors, "vectors")?;
    required(&cfg.paths.dataset, "dataset")?;
    let out = required(&cfg.paths.output, "out")?;
    let t = train_model(cfg)?;
    let model_dir = out.join("model");
    save_model(&model_dir, &t.kb, &t.params).with_context(|| format!("cannot save model to {}", model_dir.display()))?;
    let json = t.metrics.to_json();
    write_file(&out.join("metrics.json"), &json)?;
    out!("{json}");
    Ok(())
}

#[derive(Debug, Serialize)]
struct PredictionRecord<'a> {
    query: String,
    candidates: Vec<&'a str>,
    scores: &'a [f64],
    predicted: &'a str,
    answer: &'a str,
    correct: bool,
    proof: Option<String>,
}

#[derive(Debug, Serialize)]
struct EvalMetrics {
    examples: usize,
    accuracy: f64,
}

fn cmd_eval(cfg: &RunConfig) -> Result<(), Failure> {
    required(&cfg.paths.triples, "triples")?;
    required(&cfg.paths.vectors, "vectors")?;
    let dataset_path = required(&cfg.paths.dataset, "dataset")?;
    let model_dir = required(&cfg.paths.model, "model")?;
    let (mut kb, vectors) = load_kb(cfg)?;
    let vectors = vectors.expect("vectors path checked");
    let dataset = load_examples(dataset_path, &mut kb)?;
    let params = load_model(model_dir, &mut kb, &vectors, cfg.seed).map_err(anyhow::Error::from)?;
    let ev = evaluate(&dataset, &kb, &params, &cfg.train_config());
    let metrics = serde_json::to_string_pretty(&EvalMetrics { examples: dataset.len(), accuracy: ev.accuracy })
        .expect("metrics serialise")
        + "\n";
    if let Some(out) = &cfg.paths.output {
        std::fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
        let mut lines = String::new();
        for (ex, p) in dataset.iter().zip(&ev.predictions) {
            let name = |s| kb.symbols.text(s);
            let rec = PredictionRecord {
                query: kb.symbols.show(&ex.query).to_string(),
                candidates: ex.candidates.iter().map(|&c| name(c)).collect(),
                scores: &p.scores,
                predicted: name(ex.candidates[p.predicted]),
                answer: name(ex.answer),
                correct: p.correct,
                proof: p.proof.as_ref().map(|pr| explain(pr, &kb).text),
            };
            lines.push_str(&serde_json::to_string(&rec).expect("record serialises"));
            lines.push('\n');
        }
        write_file(&out.join("predictions.jsonl"), &lines)?;
        write_file(&out.join("eval.json"), &metrics)?;
    }
    out!("{metrics}");
    Ok(())
}

fn cmd_prove(cfg: &RunConfig, goal: &str, kind: SimilarityKind, dot: Option<&Path>) -> Result<(), Failure> {
    if cfg.paths.triples.is_none() && cfg.paths.rules.is_none() {
        return usage("prove needs --triples or --rules");
    }
    let (mut kb, vectors) = load_kb(cfg)?;
    let goal = parse_goal(goal, &mut kb.symbols).map_err(|e| Failure::Usage(format!("goal: {e}")))?;
    let outcome = match kind {
        SimilarityKind::Exact => {
            let symbols = kb.symbols.clone();
            prove(&goal, &kb, &ExactMatch::new(&symbols), &cfg.prover)
        }
        SimilarityKind::Embedding => {
            let Some(vectors) = vectors else {
                return usage("--similarity embedding needs --vectors");
            };
            let params = match &cfg.paths.model {
                Some(dir) => load_model(dir, &mut kb, &vectors, cfg.seed).map_err(anyhow::Error::from)?,
                None => init_parameters(&kb, &vectors, &cfg.init, cfg.seed).map_err(anyhow::Error::from)?,
            };
            prove(&goal, &kb, &LazyEncoded::new(&params), &cfg.prover)
        }
    };
    let Some(proof) = outcome.best else {
        outln!("no proof of {} with score >= {}", kb.symbols.show(&goal), cfg.prover.threshold);
        return Ok(());
    };
    let e = explain(&proof, &kb);
    out!("{}\n{}", e.text, e.dot);
    if let Some(p) = dot {
        write_file(p, &e.dot)?;
    }
    Ok(())
}

fn cmd_check_grad(tapes: usize, seed: u64) -> Result<(), Failure> {
    let r = check_gradients(tapes, seed);
    outln!(
        "tapes {}  rejected {}  coordinates {}  max relative error {:.3e}",
        r.tapes, r.rejected, r.coordinates, r.max_rel_error
    );
    if r.max_rel_error > GRAD_TOLERANCE {
        return Err(anyhow::anyhow!("max relative error {:.3e} exceeds {GRAD_TOLERANCE:e} at {:?}", r.max_rel_error, r.worst).into());
    }
    Ok(())
}

fn cmd_selftest(programs: usize, seed: u64) -> Result<(), Failure> {
    let mut failed = Vec::new();
    for (name, r) in [("classical reduction", classical_reduction(programs, seed)), ("pruning soundness", pruning_soundness(programs, seed))] {
        outln!("{name}: {} programs, {} checks, {} mismatches", r.instances, r.checks, r.mismatches.len());
        for m in r.mismatches.iter().take(5) {
            outln!("  {m}");
        }
        if !r.passed() {
            failed.push(name);
        }
    }
    if !failed.is_empty() {
        return Err(anyhow::anyhow!("selftest failed: {}", failed.join(", ")).into());
    }
    Ok(())
}
