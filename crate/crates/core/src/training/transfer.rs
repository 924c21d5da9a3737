//! Cross-domain and cross-lingual transfer runs.

use std::str::FromStr;

use super::{tune_grid, Grid, GridSearch, TaskRole, TaskSpec, TrainReport, TrainingConfig, TrainingSetup};
use crate::data::{Document, EmbeddingTable, Vocab};
use crate::error::{Error, Result};
use crate::eval::{boundary_f1, Metrics};
use crate::model::{predict, ModelParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransferMode {
    /// Train on the other domains, tune on a small target-domain dev set.
    CrossDomain,
    /// Train on other languages, tune on one of them; no target data at all.
    CrossLingual,
}

impl FromStr for TransferMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cross-domain" => Ok(TransferMode::CrossDomain),
            "cross-lingual" => Ok(TransferMode::CrossLingual),
            other => Err(Error::Config(format!(
                "unknown transfer mode `{other}` (expected cross-domain or cross-lingual)"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TransferRequest<'a> {
    pub mode: TransferMode,
    /// Source tasks with training data.
    pub sources: &'a [TaskSpec],
    /// Name of the unseen target.
    pub target: &'a str,
    /// Task the tuning dev set belongs to: a source task for cross-lingual
    /// runs, the target itself for cross-domain runs.
    pub dev_task: &'a str,
    pub dev: &'a [Document],
    pub test: &'a [Document],
    pub grid: &'a Grid,
    pub vocab: &'a Vocab,
    pub pretrained: Option<&'a EmbeddingTable>,
    pub jobs: usize,
}

#[derive(Debug, Clone)]
pub struct TransferOutcome {
    pub test: Metrics,
    pub config: TrainingConfig,
    pub head: String,
    pub search: GridSearch,
    pub report: TrainReport,
    pub model: ModelParams,
}

impl TransferRequest<'_> {
    fn check(&self) -> Result<()> {
        if self.sources.is_empty() {
            return Err(Error::Config("transfer needs at least one source task".into()));
        }
        if self.sources.iter().any(|s| s.name == self.target && !s.train.is_empty()) {
            return Err(Error::Protocol(format!(
                "target `{}` must not contribute training documents",
                self.target
            )));
        }
        let dev_is_source = self.sources.iter().any(|s| s.name == self.dev_task);
        match self.mode {
            TransferMode::CrossLingual if self.dev_task == self.target || !dev_is_source => {
                Err(Error::Protocol(format!(
                    "cross-lingual runs tune on a source task, not on `{}`",
                    self.dev_task
                )))
            }
            TransferMode::CrossDomain if self.dev_task != self.target => Err(Error::Protocol(format!(
                "cross-domain runs tune on target `{}` dev data, not on `{}`",
                self.target, self.dev_task
            ))),
            _ => Ok(()),
        }
    }
}

/// Tunes on the prescribed dev set, retrains with the winning
/// configuration and scores the target test set.
pub fn run_transfer_protocol(req: &TransferRequest<'_>) -> Result<TransferOutcome> {
    req.check()?;
    let mut tasks: Vec<TaskSpec> = req
        .sources
        .iter()
        .filter(|s| !s.train.is_empty())
        .cloned()
        .collect();
    if tasks.is_empty() {
        return Err(Error::Config("every source task is empty".into()));
    }
    let target_task = if tasks.len() == 1 {
        tasks[0].name.clone()
    } else {
        if !tasks.iter().any(|t| t.name == req.dev_task) {
            // untrained head for the dev task; selection falls back to the
            // best trained head
            tasks.push(TaskSpec::new(req.dev_task, Vec::new(), TaskRole::Target));
        }
        req.dev_task.to_string()
    };
    let grid = Grid {
        base: TrainingConfig {
            tasks: tasks.iter().map(|t| t.name.clone()).collect(),
            target_task,
            ..req.grid.base.clone()
        },
        ..req.grid.clone()
    };
    let setup = TrainingSetup {
        vocab: req.vocab,
        pretrained: req.pretrained,
        tasks: &tasks,
        dev: req.dev,
    };
    let search = tune_grid(&grid, &setup, req.jobs)?;
    let config = search.best().config.clone();
    let (model, report) = setup.train(&config)?;
    let head = report.selected_head.clone();
    let predicted = req
        .test
        .iter()
        .map(|d| d.with_labels(&predict(&model, d, req.vocab, &head)?))
        .collect::<Result<Vec<_>>>()?;
    let test = boundary_f1(req.test, &predicted)?;
    Ok(TransferOutcome {
        test,
        config,
        head,
        search,
        report,
        model,
    })
}
