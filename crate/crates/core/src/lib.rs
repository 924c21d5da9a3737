//! Document-level discourse segmentation.
//!
//! A stacked bi-LSTM reads each document as an interleaved word/POS
//! sequence and tags every word as beginning (`B`) or continuing (`I`) an
//! elementary discourse unit. Several related corpora can be trained
//! jointly with one shared trunk and one output layer per task.

pub mod baselines;
pub mod cli;
pub mod data;
pub mod error;
pub mod eval;
pub mod kernel;
pub mod model;
pub mod training;

pub use data::{Document, Label, Token, Vocab};
pub use error::{Error, Result};
pub use eval::Metrics;
pub use model::ModelParams;
pub use training::{TaskSpec, TrainReport, TrainingConfig};
