//! SGD training with hard parameter sharing and dev-based model selection.
//!
//! One SGD step consumes one document. Mono-task training visits the
//! training documents in a freshly shuffled order every iteration.
//! Multi-task training draws a task uniformly at random, then one of its
//! documents uniformly, and updates the shared trunk plus that task's head;
//! an iteration is as many steps as there are training documents in total.
//! After every iteration the target head is scored on the dev set and the
//! best-scoring parameters are kept.

use std::collections::HashSet;
use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{encode_document, Document, EmbeddingTable, EncodedSequence, Vocab};
use crate::error::{Error, Result};
use crate::eval::{boundary_counts, Counts, Metrics};
use crate::model::{build_model, labels_from_distribution, ModelParams};

mod grid;
mod transfer;

pub use grid::{tune_grid, Grid, GridResult, GridSearch};
pub use transfer::{run_transfer_protocol, TransferMode, TransferOutcome, TransferRequest};

/// Iteration counts searched by default.
pub const GRID_ITERATIONS: [usize; 3] = [10, 20, 30];
/// Noise levels searched by default.
pub const GRID_NOISE: [f64; 2] = [0.1, 0.2];
/// Embedding sizes searched by default.
pub const GRID_DIMS: [usize; 2] = [50, 500];

const SAMPLING_STREAM: u64 = 1;
const NOISE_STREAM: u64 = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingConfig {
    pub iterations: usize,
    pub noise: f64,
    pub dim: usize,
    pub layers: usize,
    pub hidden: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Task names, one output head each, in head order.
    pub tasks: Vec<String>,
    /// Task whose dev score drives model selection.
    pub target_task: String,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            iterations: 30,
            noise: 0.2,
            dim: 500,
            layers: 2,
            hidden: 100,
            learning_rate: 0.1,
            seed: 1,
            tasks: vec!["main".into()],
            target_task: "main".into(),
        }
    }
}

impl TrainingConfig {
    /// Configuration for a single task called `task`.
    pub fn mono(task: impl Into<String>) -> Self {
        let task = task.into();
        TrainingConfig {
            tasks: vec![task.clone()],
            target_task: task,
            ..Default::default()
        }
    }

    pub(crate) fn validate_shape(&self) -> Result<()> {
        if self.layers == 0 || self.hidden == 0 || self.dim == 0 {
            return Err(Error::Config(format!(
                "layers, hidden and dim must be positive (got n={}, h={}, d={})",
                self.layers, self.hidden, self.dim
            )));
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_shape()?;
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(Error::Config(format!("noise must be >= 0, got {}", self.noise)));
        }
        let mut seen = HashSet::new();
        if let Some(dup) = self.tasks.iter().find(|t| !seen.insert(t.as_str())) {
            return Err(Error::Config(format!("duplicate task name `{dup}`")));
        }
        if !self.tasks.contains(&self.target_task) {
            return Err(Error::Config(format!(
                "target task `{}` is not among the tasks {:?}",
                self.target_task, self.tasks
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskRole {
    Target,
    Auxiliary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskSpec {
    pub name: String,
    pub train: Vec<Document>,
    pub role: TaskRole,
}

impl TaskSpec {
    pub fn new(name: impl Into<String>, train: Vec<Document>, role: TaskRole) -> Self {
        TaskSpec {
            name: name.into(),
            train,
            role,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    /// 1-based.
    pub iteration: usize,
    pub mean_loss: f64,
    pub dev: Metrics,
    /// Head the dev score was computed with.
    pub head: String,
    /// SGD steps taken per task, in config task order.
    pub steps_per_task: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainReport {
    pub rows: Vec<IterationRecord>,
    /// 1-based iteration whose parameters were kept; `None` without training.
    pub selected_iteration: Option<usize>,
    pub final_dev_f1: f64,
    /// Head to predict with.
    pub selected_head: String,
}

impl TrainReport {
    /// Tab-separated table, one row per iteration.
    pub fn to_table(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for TrainReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "iteration\tloss\tprecision\trecall\tf1\thead")?;
        for r in &self.rows {
            writeln!(
                f,
                "{}\t{:.6}\t{:.4}\t{:.4}\t{:.4}\t{}",
                r.iteration, r.mean_loss, r.dev.precision, r.dev.recall, r.dev.f1, r.head
            )?;
        }
        match self.selected_iteration {
            Some(i) => writeln!(
                f,
                "# selected iteration {i} head {} dev f1 {:.4}",
                self.selected_head, self.final_dev_f1
            ),
            None => writeln!(f, "# no training iterations"),
        }
    }
}

/// Encoded dev documents with their gold labels.
struct DevSet {
    seqs: Vec<EncodedSequence>,
    gold: Vec<Vec<crate::data::Label>>,
}

impl DevSet {
    fn new(docs: &[Document], vocab: &Vocab) -> Result<Self> {
        if docs.is_empty() {
            return Err(Error::Config("the dev set is empty".into()));
        }
        let mut seqs = Vec::with_capacity(docs.len());
        let mut gold = Vec::with_capacity(docs.len());
        for d in docs {
            gold.push(
                d.gold_labels()
                    .ok_or_else(|| Error::Data(format!("dev document `{}` is not fully labeled", d.id)))?,
            );
            seqs.push(encode_document(d, vocab)?);
        }
        Ok(DevSet { seqs, gold })
    }

    fn score(&self, model: &ModelParams, task: &str) -> Result<Metrics> {
        let mut counts = Counts::default();
        for (seq, gold) in self.seqs.iter().zip(&self.gold) {
            let dist = model.infer(seq, task)?;
            let pred = labels_from_distribution(&dist, &seq.token_mask);
            counts.add(boundary_counts(gold, &pred, 1));
        }
        Ok(counts.metrics())
    }
}

/// How dev scores pick the head.
enum Selection {
    Fixed(String),
    /// The target task has no training data: score every trained head and
    /// keep the best one.
    BestOf(Vec<String>),
}

impl Selection {
    fn score(&self, model: &ModelParams, dev: &DevSet) -> Result<(String, Metrics)> {
        match self {
            Selection::Fixed(task) => Ok((task.clone(), dev.score(model, task)?)),
            Selection::BestOf(tasks) => {
                let mut best: Option<(String, Metrics)> = None;
                for t in tasks {
                    let m = dev.score(model, t)?;
                    if best.as_ref().is_none_or(|(_, b)| m.f1 > b.f1) {
                        best = Some((t.clone(), m));
                    }
                }
                Ok(best.expect("at least one trained head"))
            }
        }
    }
}

/// `(task, document)` indices drawn for `steps` multi-task SGD steps.
///
/// `sizes[t]` is the number of training documents of task `t`; tasks without
/// documents are never drawn. This is the exact sequence
/// [`train_multitask`] follows, one iteration after another, for a given
/// seed.
pub fn multitask_schedule(sizes: &[usize], steps: usize, seed: u64) -> Vec<(usize, usize)> {
    let mut rng = sampling_rng(seed);
    let active: Vec<usize> = (0..sizes.len()).filter(|&t| sizes[t] > 0).collect();
    (0..steps)
        .map(|_| draw_step(&mut rng, &active, sizes))
        .collect()
}

fn draw_step<R: Rng>(rng: &mut R, active: &[usize], sizes: &[usize]) -> (usize, usize) {
    let t = active[rng.random_range(0..active.len())];
    (t, rng.random_range(0..sizes[t]))
}

fn sampling_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(SAMPLING_STREAM);
    rng
}

fn noise_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(NOISE_STREAM);
    rng
}

/// One SGD step on `seq` for `task`; returns the pre-update loss.
pub fn sgd_step<R: Rng + ?Sized>(
    model: &mut ModelParams,
    seq: &EncodedSequence,
    task: &str,
    config: &TrainingConfig,
    rng: &mut R,
) -> Result<f64> {
    let (loss, grads) = model.loss_and_grads(seq, task, config.noise, rng)?;
    model.apply_sgd(&grads, task, config.learning_rate)?;
    Ok(loss)
}

fn encode_all(docs: &[Document], vocab: &Vocab) -> Result<Vec<EncodedSequence>> {
    docs.iter()
        .map(|d| {
            let seq = encode_document(d, vocab)?;
            if seq.labels.is_none() {
                return Err(Error::Data(format!("training document `{}` is not fully labeled", d.id)));
            }
            Ok(seq)
        })
        .collect()
}

enum Sampler {
    /// Shuffled pass over one task's documents.
    Epoch,
    /// Uniform task, then uniform document.
    Uniform,
}

struct Loop<'a> {
    config: &'a TrainingConfig,
    tasks: Vec<(String, Vec<EncodedSequence>)>,
    dev: DevSet,
    selection: Selection,
    sampler: Sampler,
}

impl Loop<'_> {
    fn run(self, mut model: ModelParams) -> Result<(ModelParams, TrainReport)> {
        let config = self.config;
        let mut report = TrainReport {
            selected_head: match &self.selection {
                Selection::Fixed(t) => t.clone(),
                Selection::BestOf(ts) => ts[0].clone(),
            },
            ..Default::default()
        };
        if config.iterations == 0 {
            return Ok((model, report));
        }
        let sizes: Vec<usize> = self.tasks.iter().map(|(_, s)| s.len()).collect();
        let active: Vec<usize> = (0..sizes.len()).filter(|&t| sizes[t] > 0).collect();
        let steps: usize = sizes.iter().sum();
        let mut sampling = sampling_rng(config.seed);
        let mut noise = noise_rng(config.seed);
        let mut best: Option<ModelParams> = None;

        for iteration in 1..=config.iterations {
            let order: Vec<(usize, usize)> = match self.sampler {
                Sampler::Epoch => {
                    let mut idx: Vec<usize> = (0..sizes[0]).collect();
                    idx.shuffle(&mut sampling);
                    idx.into_iter().map(|d| (0, d)).collect()
                }
                Sampler::Uniform => (0..steps)
                    .map(|_| draw_step(&mut sampling, &active, &sizes))
                    .collect(),
            };
            let mut total = 0.0;
            let mut steps_per_task = vec![0; sizes.len()];
            for &(t, d) in &order {
                let (name, seqs) = &self.tasks[t];
                let loss = sgd_step(&mut model, &seqs[d], name, config, &mut noise)?;
                if !loss.is_finite() {
                    return Err(Error::Training {
                        iteration,
                        message: format!("non-finite loss on task `{name}`"),
                    });
                }
                total += loss;
                steps_per_task[t] += 1;
            }
            let mean_loss = total / order.len() as f64;
            let (head, dev) = self.selection.score(&model, &self.dev)?;
            log::info!(
                "iteration {iteration}: loss {mean_loss:.6} dev f1 {:.4} ({head})",
                dev.f1
            );
            if best.is_none() || dev.f1 > report.final_dev_f1 {
                best = Some(model.clone());
                report.selected_iteration = Some(iteration);
                report.final_dev_f1 = dev.f1;
                report.selected_head = head.clone();
            }
            report.rows.push(IterationRecord {
                iteration,
                mean_loss,
                dev,
                head,
                steps_per_task,
            });
        }
        Ok((best.expect("at least one iteration"), report))
    }
}

/// Trains a single-task model starting from `init`.
pub fn train_mono(
    init: ModelParams,
    vocab: &Vocab,
    train: &[Document],
    dev: &[Document],
    config: &TrainingConfig,
) -> Result<(ModelParams, TrainReport)> {
    config.validate()?;
    if config.tasks.len() != 1 {
        return Err(Error::Config(format!(
            "mono-task training needs exactly one task, got {}",
            config.tasks.len()
        )));
    }
    if train.is_empty() {
        return Err(Error::Config("the training set is empty".into()));
    }
    let task = config.target_task.clone();
    if !init.heads.contains_key(&task) {
        return Err(Error::Task(task));
    }
    Loop {
        config,
        tasks: vec![(task.clone(), encode_all(train, vocab)?)],
        dev: DevSet::new(dev, vocab)?,
        selection: Selection::Fixed(task),
        sampler: Sampler::Epoch,
    }
    .run(init)
}

/// Trains with hard parameter sharing over `tasks`, starting from `init`.
///
/// `dev` belongs to `config.target_task`. If the target task has no training
/// documents its head is never updated, and selection instead uses the
/// trained head that scores best on `dev`.
pub fn train_multitask(
    init: ModelParams,
    vocab: &Vocab,
    tasks: &[TaskSpec],
    dev: &[Document],
    config: &TrainingConfig,
) -> Result<(ModelParams, TrainReport)> {
    config.validate()?;
    if tasks.len() < 2 {
        return Err(Error::Config(format!(
            "multi-task training needs at least two tasks, got {}",
            tasks.len()
        )));
    }
    let mut seen = HashSet::new();
    for t in tasks {
        if !seen.insert(t.name.as_str()) {
            return Err(Error::Config(format!("duplicate task name `{}`", t.name)));
        }
        if !init.heads.contains_key(&t.name) {
            return Err(Error::Task(t.name.clone()));
        }
    }
    if tasks.iter().all(|t| t.train.is_empty()) {
        return Err(Error::Config("every task has an empty training set".into()));
    }
    let target = tasks
        .iter()
        .find(|t| t.name == config.target_task)
        .ok_or_else(|| Error::Task(config.target_task.clone()))?;
    let selection = if target.train.is_empty() {
        Selection::BestOf(
            tasks
                .iter()
                .filter(|t| !t.train.is_empty())
                .map(|t| t.name.clone())
                .collect(),
        )
    } else {
        Selection::Fixed(target.name.clone())
    };
    let encoded = tasks
        .iter()
        .map(|t| Ok((t.name.clone(), encode_all(&t.train, vocab)?)))
        .collect::<Result<Vec<_>>>()?;
    Loop {
        config,
        tasks: encoded,
        dev: DevSet::new(dev, vocab)?,
        selection,
        sampler: Sampler::Uniform,
    }
    .run(init)
}

/// Everything needed to train a fresh model from a configuration.
#[derive(Debug, Clone, Copy)]
pub struct TrainingSetup<'a> {
    pub vocab: &'a Vocab,
    pub pretrained: Option<&'a EmbeddingTable>,
    pub tasks: &'a [TaskSpec],
    pub dev: &'a [Document],
}

impl TrainingSetup<'_> {
    /// Builds a model for `config` and trains it: mono-task for a single
    /// task, multi-task otherwise.
    pub fn train(&self, config: &TrainingConfig) -> Result<(ModelParams, TrainReport)> {
        let init = build_model(config, self.vocab, self.pretrained)?;
        match self.tasks {
            [] => Err(Error::Config("no tasks to train".into())),
            [only] => train_mono(init, self.vocab, &only.train, self.dev, config),
            many => train_multitask(init, self.vocab, many, self.dev, config),
        }
    }
}
