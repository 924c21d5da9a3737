//! Exhaustive search over iterations, noise and embedding size.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use super::{TrainReport, TrainingConfig, TrainingSetup, GRID_DIMS, GRID_ITERATIONS, GRID_NOISE};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    /// Every other setting (and the base seed) comes from here.
    pub base: TrainingConfig,
    pub iterations: Vec<usize>,
    pub noise: Vec<f64>,
    pub dims: Vec<usize>,
}

impl Grid {
    pub fn new(base: TrainingConfig) -> Self {
        Grid {
            base,
            iterations: GRID_ITERATIONS.to_vec(),
            noise: GRID_NOISE.to_vec(),
            dims: GRID_DIMS.to_vec(),
        }
    }

    /// Configurations in search order: iterations, then noise, then dim,
    /// with `seed = base.seed ^ index`.
    pub fn configs(&self) -> Vec<TrainingConfig> {
        let mut out = Vec::new();
        for &iterations in &self.iterations {
            for &noise in &self.noise {
                for &dim in &self.dims {
                    let seed = self.base.seed ^ out.len() as u64;
                    out.push(TrainingConfig {
                        iterations,
                        noise,
                        dim,
                        seed,
                        ..self.base.clone()
                    });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridResult {
    pub index: usize,
    pub config: TrainingConfig,
    pub dev_f1: f64,
    pub report: TrainReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSearch {
    /// In grid order.
    pub results: Vec<GridResult>,
    /// Index into `results`.
    pub best: usize,
}

impl GridSearch {
    pub fn best(&self) -> &GridResult {
        &self.results[self.best]
    }

    /// One line per configuration, best marked with `*`.
    pub fn to_table(&self) -> String {
        let mut s = String::from("index\titerations\tnoise\tdim\tseed\tdev_f1\n");
        for r in &self.results {
            s.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{:.4}{}\n",
                r.index,
                r.config.iterations,
                r.config.noise,
                r.config.dim,
                r.config.seed,
                r.dev_f1,
                if r.index == self.best { "\t*" } else { "" }
            ));
        }
        s
    }
}

/// Highest dev F1; ties prefer fewer iterations, then smaller dim, then
/// smaller noise, then grid order.
fn pick_best(results: &[GridResult]) -> usize {
    let key = |r: &GridResult| (r.config.iterations, r.config.dim, r.config.noise, r.index);
    let mut best = 0;
    for (i, r) in results.iter().enumerate().skip(1) {
        let b = &results[best];
        let better = r.dev_f1 > b.dev_f1
            || (r.dev_f1 == b.dev_f1 && key(r).partial_cmp(&key(b)) == Some(std::cmp::Ordering::Less));
        if better {
            best = i;
        }
    }
    best
}

/// Trains every grid configuration, `jobs` at a time, and keeps the one
/// with the best dev F1.
pub fn tune_grid(grid: &Grid, setup: &TrainingSetup<'_>, jobs: usize) -> Result<GridSearch> {
    let configs = grid.configs();
    if configs.is_empty() {
        return Err(Error::Config("the hyper-parameter grid is empty".into()));
    }
    let jobs = jobs.clamp(1, configs.len());
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<GridResult>>>> = Mutex::new((0..configs.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let index = next.fetch_add(1, Ordering::SeqCst);
                let Some(config) = configs.get(index) else { break };
                log::info!(
                    "grid {index}: iterations {} noise {} dim {}",
                    config.iterations,
                    config.noise,
                    config.dim
                );
                let outcome = setup.train(config).map(|(_, report)| GridResult {
                    index,
                    config: config.clone(),
                    dev_f1: report.final_dev_f1,
                    report,
                });
                slots.lock().expect("grid worker panicked")[index] = Some(outcome);
            });
        }
    });
    let results = slots
        .into_inner()
        .expect("grid worker panicked")
        .into_iter()
        .map(|r| r.expect("every grid point is visited"))
        .collect::<Result<Vec<_>>>()?;
    let best = pick_best(&results);
    Ok(GridSearch { results, best })
}
