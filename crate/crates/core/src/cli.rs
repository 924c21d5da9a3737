//! Command-line front end.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::baselines::{run_baseline, BaselineMode};
use crate::data::{
    build_vocab, generate_synthetic, load_embeddings, read_corpus, write_corpus, write_predictions,
    BoundaryRule, CorpusStats, Document, EmbeddingTable, SyntheticSpec, Vocab,
};
use crate::error::{Error, Result};
use crate::eval::{boundary_f1, intra_sentential_f1};
use crate::model::{load_model, predict, save_model};
use crate::training::{
    run_transfer_protocol, tune_grid, Grid, TaskRole, TaskSpec, TrainingConfig, TrainingSetup,
    TransferMode, TransferRequest, GRID_DIMS, GRID_ITERATIONS, GRID_NOISE,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_TRAINING: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "docseg", version, about = "Document-level discourse segmentation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a mono-task or multi-task segmenter.
    Train(TrainArgs),
    /// Label a corpus with a trained model.
    Predict(PredictArgs),
    /// Score predicted boundaries against gold.
    Evaluate(EvaluateArgs),
    /// Run a rule-based baseline.
    Baseline(BaselineArgs),
    /// Grid-search iterations, noise and embedding size on dev.
    Tune(TuneArgs),
    /// Cross-domain or cross-lingual transfer run.
    Transfer(TransferArgs),
    /// Write a synthetic corpus with a known boundary rule.
    GenSynthetic(SyntheticArgs),
    /// Print corpus counts.
    Stats(StatsArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Embedding size; defaults to 500, or to the --embeddings size.
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long, default_value_t = 100)]
    pub hidden: usize,
    #[arg(long, default_value_t = 2)]
    pub layers: usize,
    #[arg(long, default_value_t = 30)]
    pub iters: usize,
    #[arg(long, default_value_t = 0.2)]
    pub noise: f64,
    #[arg(long, default_value_t = 0.1)]
    pub lr: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Pre-trained word vectors (text format).
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Keep only the first N dimensions of the pre-trained vectors.
    #[arg(long, requires = "embeddings")]
    pub truncate_dim: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct TaskArgs {
    /// Training corpus of a single-task run.
    #[arg(long, conflicts_with = "task")]
    pub train: Option<PathBuf>,
    /// `name=path` training corpus; repeat for multi-task runs.
    #[arg(long, value_parser = parse_task)]
    pub task: Vec<(String, PathBuf)>,
    /// Task optimised on dev; defaults to the first --task, or `main`.
    #[arg(long)]
    pub target_task: Option<String>,
    #[arg(long)]
    pub dev: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct GridArgs {
    #[arg(long, value_delimiter = ',', default_values_t = GRID_ITERATIONS)]
    pub grid_iters: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = GRID_NOISE)]
    pub grid_noise: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = GRID_DIMS)]
    pub grid_dims: Vec<usize>,
    /// Grid points trained in parallel.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub tasks: TaskArgs,
    #[command(flatten)]
    pub model_args: ModelArgs,
    /// Where to write the model.
    #[arg(long)]
    pub model: PathBuf,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    /// Head to predict with; defaults to the model's target task.
    #[arg(long)]
    pub target_task: Option<String>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub gold: PathBuf,
    #[arg(long)]
    pub pred: PathBuf,
    /// Score boundaries inside multi-EDU sentences only.
    #[arg(long)]
    pub intra: bool,
}

#[derive(Debug, Args)]
pub struct BaselineArgs {
    /// `sent` or `punct`.
    #[arg(long)]
    pub mode: BaselineMode,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    #[command(flatten)]
    pub tasks: TaskArgs,
    #[command(flatten)]
    pub model_args: ModelArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Retrain the best configuration and write it here.
    #[arg(long)]
    pub model: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TransferArgs {
    /// `cross-domain` or `cross-lingual`.
    #[arg(long)]
    pub mode: TransferMode,
    /// `name=path` source corpus; repeatable.
    #[arg(long, value_parser = parse_task, required = true)]
    pub task: Vec<(String, PathBuf)>,
    /// Name of the unseen target.
    #[arg(long)]
    pub target_task: String,
    /// Task the dev set belongs to; defaults to the target (cross-domain).
    #[arg(long)]
    pub dev_task: Option<String>,
    #[arg(long)]
    pub dev: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    #[command(flatten)]
    pub model_args: ModelArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long)]
    pub model: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SyntheticArgs {
    /// `key = value` generator settings; flags override them.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub docs: Option<usize>,
    /// Comma-separated rules: punct, connective, sentence.
    #[arg(long, value_delimiter = ',')]
    pub rule: Vec<BoundaryRule>,
    #[arg(long)]
    pub vocab_size: Option<usize>,
    #[arg(long)]
    pub min_len: Option<usize>,
    #[arg(long)]
    pub max_len: Option<usize>,
    #[arg(long)]
    pub word_prefix: Option<String>,
    #[arg(long)]
    pub id_prefix: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long, required = true)]
    pub input: Vec<PathBuf>,
}

fn parse_task(s: &str) -> std::result::Result<(String, PathBuf), String> {
    match s.split_once('=') {
        Some((name, path)) if !name.is_empty() && !path.is_empty() => {
            Ok((name.to_string(), PathBuf::from(path)))
        }
        _ => Err(format!("expected name=path, got `{s}`")),
    }
}

/// Exit code for a library error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::Task(_) | Error::Protocol(_) => EXIT_USAGE,
        Error::Training { .. } | Error::Numerical(_) => EXIT_TRAINING,
        _ => EXIT_DATA,
    }
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match run(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Train(a) => train(a),
        Command::Predict(a) => predict_cmd(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Baseline(a) => baseline(a),
        Command::Tune(a) => tune(a),
        Command::Transfer(a) => transfer(a),
        Command::GenSynthetic(a) => gen_synthetic(a),
        Command::Stats(a) => stats(a),
    }
}

fn load_pretrained(args: &ModelArgs) -> Result<Option<EmbeddingTable>> {
    args.embeddings
        .as_ref()
        .map(|p| load_embeddings(p, args.truncate_dim))
        .transpose()
}

fn config_from(args: &ModelArgs, pretrained: Option<&EmbeddingTable>, tasks: &[TaskSpec], target: &str) -> TrainingConfig {
    TrainingConfig {
        iterations: args.iters,
        noise: args.noise,
        dim: args
            .dim
            .or(pretrained.map(EmbeddingTable::dim))
            .unwrap_or(TrainingConfig::default().dim),
        layers: args.layers,
        hidden: args.hidden,
        learning_rate: args.lr,
        seed: args.seed,
        tasks: tasks.iter().map(|t| t.name.clone()).collect(),
        target_task: target.to_string(),
    }
}

fn read_tasks(specs: &[(String, PathBuf)], target: Option<&str>) -> Result<Vec<TaskSpec>> {
    specs
        .iter()
        .map(|(name, path)| {
            let role = if Some(name.as_str()) == target {
                TaskRole::Target
            } else {
                TaskRole::Auxiliary
            };
            Ok(TaskSpec::new(name.clone(), read_corpus(path)?, role))
        })
        .collect()
}

fn vocab_of(tasks: &[TaskSpec]) -> Result<Vocab> {
    let all: Vec<Document> = tasks.iter().flat_map(|t| t.train.iter().cloned()).collect();
    build_vocab(&all)
}

struct Prepared {
    tasks: Vec<TaskSpec>,
    target: String,
    dev: Vec<Document>,
    vocab: Vocab,
    pretrained: Option<EmbeddingTable>,
}

fn prepare(tasks: &TaskArgs, model_args: &ModelArgs) -> Result<Prepared> {
    let (specs, target) = match (&tasks.train, tasks.task.is_empty()) {
        (Some(path), _) => {
            let name = tasks.target_task.clone().unwrap_or_else(|| "main".into());
            (vec![(name.clone(), path.clone())], name)
        }
        (None, false) => {
            let target = tasks
                .target_task
                .clone()
                .unwrap_or_else(|| tasks.task[0].0.clone());
            (tasks.task.clone(), target)
        }
        (None, true) => return Err(Error::Config("give --train or at least one --task".into())),
    };
    let tasks_read = read_tasks(&specs, Some(&target))?;
    let vocab = vocab_of(&tasks_read)?;
    Ok(Prepared {
        dev: read_corpus(&tasks.dev)?,
        pretrained: load_pretrained(model_args)?,
        tasks: tasks_read,
        target,
        vocab,
    })
}

fn train(a: TrainArgs) -> Result<()> {
    let p = prepare(&a.tasks, &a.model_args)?;
    let config = config_from(&a.model_args, p.pretrained.as_ref(), &p.tasks, &p.target);
    let setup = TrainingSetup {
        vocab: &p.vocab,
        pretrained: p.pretrained.as_ref(),
        tasks: &p.tasks,
        dev: &p.dev,
    };
    let (model, report) = setup.train(&config)?;
    print!("{report}");
    save_model(&model, &p.vocab, &config, &a.model)
}

fn predict_cmd(a: PredictArgs) -> Result<()> {
    let (model, vocab, config) = load_model(&a.model)?;
    let head = a.target_task.unwrap_or(config.target_task);
    let docs = read_corpus(&a.input)?;
    let labels = docs
        .iter()
        .map(|d| predict(&model, d, &vocab, &head))
        .collect::<Result<Vec<_>>>()?;
    write_predictions(&docs, &labels, &a.output)
}

fn evaluate(a: EvaluateArgs) -> Result<()> {
    let gold = read_corpus(&a.gold)?;
    let pred = read_corpus(&a.pred)?;
    if a.intra {
        let r = intra_sentential_f1(&gold, &pred)?;
        print!("{}", r.metrics.report());
        println!("sentences_scored {}", r.sentences_scored);
        println!("sentences_skipped {}", r.sentences_skipped);
    } else {
        print!("{}", boundary_f1(&gold, &pred)?.report());
    }
    Ok(())
}

fn baseline(a: BaselineArgs) -> Result<()> {
    let docs = read_corpus(&a.input)?;
    let labels = docs
        .iter()
        .map(|d| run_baseline(a.mode, d))
        .collect::<Result<Vec<_>>>()?;
    write_predictions(&docs, &labels, &a.output)
}

fn grid_from(args: &GridArgs, base: TrainingConfig) -> Grid {
    Grid {
        base,
        iterations: args.grid_iters.clone(),
        noise: args.grid_noise.clone(),
        dims: args.grid_dims.clone(),
    }
}

fn tune(a: TuneArgs) -> Result<()> {
    let p = prepare(&a.tasks, &a.model_args)?;
    let base = config_from(&a.model_args, p.pretrained.as_ref(), &p.tasks, &p.target);
    let grid = grid_from(&a.grid, base);
    let setup = TrainingSetup {
        vocab: &p.vocab,
        pretrained: p.pretrained.as_ref(),
        tasks: &p.tasks,
        dev: &p.dev,
    };
    let search = tune_grid(&grid, &setup, a.grid.jobs)?;
    print!("{}", search.to_table());
    if let Some(path) = a.model {
        let config = &search.best().config;
        let (model, _) = setup.train(config)?;
        save_model(&model, &p.vocab, config, path)?;
    }
    Ok(())
}

fn transfer(a: TransferArgs) -> Result<()> {
    let sources = read_tasks(&a.task, None)?;
    let vocab = vocab_of(&sources)?;
    let pretrained = load_pretrained(&a.model_args)?;
    let dev = read_corpus(&a.dev)?;
    let test = read_corpus(&a.test)?;
    let dev_task = a.dev_task.clone().unwrap_or_else(|| a.target_task.clone());
    let base = config_from(&a.model_args, pretrained.as_ref(), &sources, &dev_task);
    let grid = grid_from(&a.grid, base);
    let outcome = run_transfer_protocol(&TransferRequest {
        mode: a.mode,
        sources: &sources,
        target: &a.target_task,
        dev_task: &dev_task,
        dev: &dev,
        test: &test,
        grid: &grid,
        vocab: &vocab,
        pretrained: pretrained.as_ref(),
        jobs: a.grid.jobs,
    })?;
    print!("{}", outcome.search.to_table());
    let c = &outcome.config;
    println!(
        "selected iterations={} noise={} dim={} seed={} head={}",
        c.iterations, c.noise, c.dim, c.seed, outcome.head
    );
    print!("{}", outcome.test.report());
    if let Some(path) = a.model {
        let config = TrainingConfig {
            target_task: outcome.head.clone(),
            ..outcome.config.clone()
        };
        save_model(&outcome.model, &vocab, &config, path)?;
    }
    Ok(())
}

fn gen_synthetic(a: SyntheticArgs) -> Result<()> {
    let mut spec = match &a.config {
        Some(path) => SyntheticSpec::load(path)?,
        None => SyntheticSpec::default(),
    };
    if let Some(n) = a.docs {
        spec.n_docs = n;
    }
    if !a.rule.is_empty() {
        spec.rules = a.rule.clone();
    }
    if let Some(v) = a.vocab_size {
        spec.vocab_size = v;
    }
    if let Some(lo) = a.min_len {
        spec.doc_len.0 = lo;
    }
    if let Some(hi) = a.max_len {
        spec.doc_len.1 = hi;
    }
    if let Some(p) = a.word_prefix {
        spec.word_prefix = p;
    }
    if let Some(p) = a.id_prefix {
        spec.id_prefix = p;
    }
    if let Some(s) = a.seed {
        spec.seed = s;
    }
    let docs = generate_synthetic(&spec)?;
    write_corpus(&docs, &a.output)
}

fn stats(a: StatsArgs) -> Result<()> {
    for path in &a.input {
        let docs = read_corpus(path)?;
        println!("# {}", display(path));
        println!("{}", CorpusStats::of(&docs));
    }
    Ok(())
}

fn display(path: &Path) -> String {
    path.display().to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn help_exits_zero() {
        assert_eq!(dispatch(["docseg", "--help"]), EXIT_OK);
        for sub in ["train", "predict", "evaluate", "baseline", "tune", "transfer", "gen-synthetic", "stats"] {
            assert_eq!(dispatch(["docseg", sub, "--help"]), EXIT_OK, "{sub}");
        }
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(dispatch(["docseg"]), EXIT_USAGE);
        assert_eq!(dispatch(["docseg", "evaluate", "--bogus"]), EXIT_USAGE);
        assert_eq!(dispatch(["docseg", "baseline", "--mode", "x", "--input", "a", "--output", "b"]), EXIT_USAGE);
    }

    #[test]
    fn defaults_match_final_settings() {
        let cli = Cli::try_parse_from(["docseg", "train", "--train", "t", "--dev", "d", "--model", "m"]).unwrap();
        let Command::Train(a) = cli.command else { panic!() };
        let p = &a.model_args;
        assert_eq!((p.layers, p.hidden, p.noise, p.iters, p.lr), (2, 100, 0.2, 30, 0.1));
        let c = config_from(p, None, &[TaskSpec::new("main", vec![], TaskRole::Target)], "main");
        assert_eq!(c.dim, 500);
    }

    #[test]
    fn task_flag_parsing() {
        assert_eq!(parse_task("en=a/b.docseg").unwrap(), ("en".into(), PathBuf::from("a/b.docseg")));
        assert!(parse_task("nopath").is_err());
        assert!(parse_task("=x").is_err());
    }

    #[test]
    fn missing_file_is_data_error() {
        assert_eq!(dispatch(["docseg", "stats", "--input", "/nonexistent/x.docseg"]), EXIT_DATA);
    }
}
