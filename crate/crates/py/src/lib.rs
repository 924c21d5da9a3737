//! Python bindings for the `docseg` discourse segmenter.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use docseg::baselines::{run_baseline, BaselineMode};
use docseg::data::{self, BoundaryRule, SyntheticSpec, Vocab};
use docseg::eval;
use docseg::model::{self, ModelParams};
use docseg::training::{TaskRole, TaskSpec, TrainingConfig, TrainingSetup};
use docseg::{Error, Label, Token};

fn to_py(err: Error) -> PyErr {
    match err {
        Error::Io { .. } => PyIOError::new_err(err.to_string()),
        Error::Training { .. } | Error::Numerical(_) => PyRuntimeError::new_err(err.to_string()),
        _ => PyValueError::new_err(err.to_string()),
    }
}

fn parse_label(s: &str) -> PyResult<Label> {
    s.parse().map_err(PyValueError::new_err)
}

/// One tokenized document. `labels` holds "B"/"I" strings or None.
#[pyclass(name = "Document", from_py_object)]
#[derive(Clone)]
pub struct PyDocument {
    #[pyo3(get)]
    pub id: String,
    #[pyo3(get)]
    pub words: Vec<String>,
    #[pyo3(get)]
    pub tags: Vec<String>,
    #[pyo3(get)]
    pub labels: Vec<Option<String>>,
    #[pyo3(get)]
    pub sent_starts: Vec<bool>,
}

impl PyDocument {
    fn from_doc(doc: &data::Document) -> Self {
        PyDocument {
            id: doc.id.clone(),
            words: doc.tokens.iter().map(|t| t.surface.clone()).collect(),
            tags: doc.tokens.iter().map(|t| t.upos.clone()).collect(),
            labels: doc
                .tokens
                .iter()
                .map(|t| t.gold_label.map(|l| l.to_string()))
                .collect(),
            sent_starts: doc.tokens.iter().map(|t| t.sent_start).collect(),
        }
    }

    fn to_doc(&self) -> PyResult<data::Document> {
        let tokens = (0..self.words.len())
            .map(|i| {
                Ok(Token {
                    surface: self.words[i].clone(),
                    upos: self.tags[i].clone(),
                    gold_label: self.labels[i].as_deref().map(parse_label).transpose()?,
                    sent_start: self.sent_starts[i],
                })
            })
            .collect::<PyResult<Vec<_>>>()?;
        let doc = data::Document::new(self.id.clone(), tokens);
        doc.validate().map_err(to_py)?;
        Ok(doc)
    }
}

#[pymethods]
impl PyDocument {
    #[new]
    #[pyo3(signature = (id, words, tags, labels=None, sent_starts=None))]
    fn new(
        id: String,
        words: Vec<String>,
        tags: Vec<String>,
        labels: Option<Vec<Option<String>>>,
        sent_starts: Option<Vec<bool>>,
    ) -> PyResult<Self> {
        let n = words.len();
        let labels = labels.unwrap_or_else(|| vec![None; n]);
        let sent_starts = sent_starts.unwrap_or_else(|| vec![false; n]);
        if tags.len() != n || labels.len() != n || sent_starts.len() != n {
            return Err(PyValueError::new_err(
                "words, tags, labels and sent_starts must have the same length",
            ));
        }
        let doc = PyDocument {
            id,
            words,
            tags,
            labels,
            sent_starts,
        };
        doc.to_doc()?;
        Ok(doc)
    }

    fn __len__(&self) -> usize {
        self.words.len()
    }

    fn __repr__(&self) -> String {
        format!("Document(id={:?}, tokens={})", self.id, self.words.len())
    }

    /// Copy of this document with `labels` replaced.
    fn with_labels(&self, labels: Vec<String>) -> PyResult<Self> {
        let labels = labels.iter().map(|l| parse_label(l)).collect::<PyResult<Vec<_>>>()?;
        let doc = self.to_doc()?.with_labels(&labels).map_err(to_py)?;
        Ok(PyDocument::from_doc(&doc))
    }
}

fn to_docs(docs: &[PyDocument]) -> PyResult<Vec<data::Document>> {
    docs.iter().map(PyDocument::to_doc).collect()
}

fn from_docs(docs: &[data::Document]) -> Vec<PyDocument> {
    docs.iter().map(PyDocument::from_doc).collect()
}

#[pyfunction]
fn read_corpus(path: PathBuf) -> PyResult<Vec<PyDocument>> {
    Ok(from_docs(&data::read_corpus(path).map_err(to_py)?))
}

#[pyfunction]
fn write_corpus(docs: Vec<PyDocument>, path: PathBuf) -> PyResult<()> {
    data::write_corpus(&to_docs(&docs)?, path).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (n_docs, seed=1, rules=vec!["connective".to_string()], vocab_size=200, min_len=10, max_len=30, word_prefix="w".to_string(), id_prefix="doc".to_string()))]
#[allow(clippy::too_many_arguments)]
fn generate_synthetic(
    n_docs: usize,
    seed: u64,
    rules: Vec<String>,
    vocab_size: usize,
    min_len: usize,
    max_len: usize,
    word_prefix: String,
    id_prefix: String,
) -> PyResult<Vec<PyDocument>> {
    let rules = rules
        .iter()
        .map(|r| r.parse::<BoundaryRule>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(to_py)?;
    let spec = SyntheticSpec {
        n_docs,
        doc_len: (min_len, max_len),
        rules,
        vocab_size,
        seed,
        word_prefix,
        id_prefix,
        ..Default::default()
    };
    Ok(from_docs(&data::generate_synthetic(&spec).map_err(to_py)?))
}

/// Labels from the `sent` or `punct` rule.
#[pyfunction]
fn baseline(mode: &str, doc: &PyDocument) -> PyResult<Vec<String>> {
    let mode: BaselineMode = mode.parse().map_err(to_py)?;
    let labels = run_baseline(mode, &doc.to_doc()?).map_err(to_py)?;
    Ok(labels.iter().map(Label::to_string).collect())
}

fn metrics_dict<'py>(py: Python<'py>, m: &eval::Metrics) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("tp", m.tp)?;
    d.set_item("fp", m.fp)?;
    d.set_item("fn", m.fn_)?;
    d.set_item("precision", m.precision)?;
    d.set_item("recall", m.recall)?;
    d.set_item("f1", m.f1)?;
    Ok(d)
}

#[pyfunction]
fn boundary_f1<'py>(py: Python<'py>, gold: Vec<PyDocument>, pred: Vec<PyDocument>) -> PyResult<Bound<'py, PyDict>> {
    let m = eval::boundary_f1(&to_docs(&gold)?, &to_docs(&pred)?).map_err(to_py)?;
    metrics_dict(py, &m)
}

#[pyfunction]
fn intra_sentential_f1<'py>(
    py: Python<'py>,
    gold: Vec<PyDocument>,
    pred: Vec<PyDocument>,
) -> PyResult<Bound<'py, PyDict>> {
    let r = eval::intra_sentential_f1(&to_docs(&gold)?, &to_docs(&pred)?).map_err(to_py)?;
    let d = metrics_dict(py, &r.metrics)?;
    d.set_item("sentences_scored", r.sentences_scored)?;
    d.set_item("sentences_skipped", r.sentences_skipped)?;
    Ok(d)
}

/// A trained segmenter with its vocabulary and configuration.
#[pyclass(name = "Model")]
pub struct PyModel {
    params: ModelParams,
    vocab: Vocab,
    config: TrainingConfig,
    report: String,
}

#[pymethods]
impl PyModel {
    /// Trains on `tasks`, a list of `(name, documents)` pairs in head
    /// order. A single pair gives mono-task training.
    #[staticmethod]
    #[pyo3(signature = (tasks, dev, target_task=None, dim=500, hidden=100, layers=2, iterations=30, noise=0.2, learning_rate=0.1, seed=1))]
    #[allow(clippy::too_many_arguments)]
    fn train(
        py: Python<'_>,
        tasks: Vec<(String, Vec<PyDocument>)>,
        dev: Vec<PyDocument>,
        target_task: Option<String>,
        dim: usize,
        hidden: usize,
        layers: usize,
        iterations: usize,
        noise: f64,
        learning_rate: f64,
        seed: u64,
    ) -> PyResult<Self> {
        let first = tasks
            .first()
            .map(|(n, _)| n.clone())
            .ok_or_else(|| PyValueError::new_err("no tasks given"))?;
        let target = target_task.unwrap_or(first);
        let specs = tasks
            .iter()
            .map(|(name, docs)| {
                let role = if *name == target { TaskRole::Target } else { TaskRole::Auxiliary };
                Ok(TaskSpec::new(name.clone(), to_docs(docs)?, role))
            })
            .collect::<PyResult<Vec<_>>>()?;
        let dev = to_docs(&dev)?;
        let config = TrainingConfig {
            iterations,
            noise,
            dim,
            layers,
            hidden,
            learning_rate,
            seed,
            tasks: specs.iter().map(|t| t.name.clone()).collect(),
            target_task: target,
        };
        py.detach(|| {
            let all: Vec<data::Document> = specs.iter().flat_map(|t| t.train.iter().cloned()).collect();
            let vocab = data::build_vocab(&all)?;
            let setup = TrainingSetup {
                vocab: &vocab,
                pretrained: None,
                tasks: &specs,
                dev: &dev,
            };
            let (params, report) = setup.train(&config)?;
            Ok(PyModel {
                params,
                vocab,
                config: TrainingConfig {
                    target_task: report.selected_head.clone(),
                    ..config.clone()
                },
                report: report.to_table(),
            })
        })
        .map_err(to_py)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let (params, vocab, config) = model::load_model(path).map_err(to_py)?;
        Ok(PyModel {
            params,
            vocab,
            config,
            report: String::new(),
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        model::save_model(&self.params, &self.vocab, &self.config, path).map_err(to_py)
    }

    /// One "B"/"I" label per token, from `task`'s head (default: the
    /// target task).
    #[pyo3(signature = (doc, task=None))]
    fn predict(&self, doc: &PyDocument, task: Option<String>) -> PyResult<Vec<String>> {
        let task = task.unwrap_or_else(|| self.config.target_task.clone());
        let labels = model::predict(&self.params, &doc.to_doc()?, &self.vocab, &task).map_err(to_py)?;
        Ok(labels.iter().map(Label::to_string).collect())
    }

    #[getter]
    fn tasks(&self) -> Vec<String> {
        self.params.tasks().map(str::to_string).collect()
    }

    #[getter]
    fn target_task(&self) -> String {
        self.config.target_task.clone()
    }

    #[getter]
    fn parameter_count(&self) -> usize {
        self.params.parameter_count()
    }

    /// Per-iteration training table; empty for loaded models.
    #[getter]
    fn report(&self) -> String {
        self.report.clone()
    }
}

#[pymodule]
fn docseg_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDocument>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(read_corpus, m)?)?;
    m.add_function(wrap_pyfunction!(write_corpus, m)?)?;
    m.add_function(wrap_pyfunction!(generate_synthetic, m)?)?;
    m.add_function(wrap_pyfunction!(baseline, m)?)?;
    m.add_function(wrap_pyfunction!(boundary_f1, m)?)?;
    m.add_function(wrap_pyfunction!(intra_sentential_f1, m)?)?;
    Ok(())
}
