//! Stacked bi-directional LSTM segmenter with one output head per task.
//!
//! The embedding table and the LSTM stack form a single trunk shared by all
//! tasks. Each task owns a linear layer mapping the top `2h` state to the
//! two class logits (B, I).

use std::collections::BTreeMap;

use indexmap::IndexMap;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::data::{encode_document, Document, EmbeddingTable, EncodedSequence, Label, Vocab};
use crate::error::{Error, Result};
use crate::kernel::{
    axpy, floored_nll, lstm_cell_backward, lstm_cell_forward, softmax2, CellState, LstmCellParams, Matrix,
    PROB_FLOOR,
};
use crate::training::TrainingConfig;

mod io;

pub use io::{decode_model, encode_model, load_model, save_model, MODEL_MAGIC, MODEL_VERSION};

/// Scale of the uniform initialization U[-0.1, 0.1].
pub const INIT_SCALE: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct BiLstmLayer {
    pub forward: LstmCellParams,
    pub backward: LstmCellParams,
}

impl BiLstmLayer {
    fn zeros(input_dim: usize, hidden: usize) -> Self {
        BiLstmLayer {
            forward: LstmCellParams::zeros(input_dim, hidden),
            backward: LstmCellParams::zeros(input_dim, hidden),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputHead {
    /// `2 × 2h`
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

impl OutputHead {
    fn zeros(top: usize) -> Self {
        OutputHead {
            weights: Matrix::zeros(2, top),
            bias: vec![0.0; 2],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    /// `V × d`
    pub embeddings: Matrix,
    pub layers: Vec<BiLstmLayer>,
    pub heads: IndexMap<String, OutputHead>,
}

/// Per-position class probabilities; index 0 is B, index 1 is I.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelDistribution {
    pub probs: Vec<[f64; 2]>,
}

impl LabelDistribution {
    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Argmax per position, ties going to B.
    pub fn argmax(&self) -> Vec<Label> {
        self.probs
            .iter()
            .map(|p| if p[0] >= p[1] { Label::B } else { Label::I })
            .collect()
    }
}

impl ModelParams {
    /// All-zero parameters of the given shape.
    pub fn zeros<S: AsRef<str>>(
        vocab_size: usize,
        dim: usize,
        hidden: usize,
        layers: usize,
        tasks: &[S],
    ) -> Self {
        let layers = (0..layers)
            .map(|l| BiLstmLayer::zeros(if l == 0 { dim } else { 2 * hidden }, hidden))
            .collect();
        let heads = tasks
            .iter()
            .map(|t| (t.as_ref().to_string(), OutputHead::zeros(2 * hidden)))
            .collect();
        ModelParams {
            embeddings: Matrix::zeros(vocab_size, dim),
            layers,
            heads,
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.embeddings.rows()
    }

    pub fn dim(&self) -> usize {
        self.embeddings.cols()
    }

    pub fn hidden(&self) -> usize {
        self.layers[0].forward.hidden()
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn tasks(&self) -> impl Iterator<Item = &str> {
        self.heads.keys().map(String::as_str)
    }

    pub fn parameter_count(&self) -> usize {
        let mut n = 0;
        self.visit_tensors(|_, t| n += t.len());
        n
    }

    /// Visits every tensor in a fixed order with a stable name.
    pub fn visit_tensors<F: FnMut(&str, &[f64])>(&self, mut f: F) {
        f("embeddings", self.embeddings.as_slice());
        for (l, layer) in self.layers.iter().enumerate() {
            layer
                .forward
                .visit(|n, t| f(&format!("layer{l}.fwd.{n}"), t));
            layer
                .backward
                .visit(|n, t| f(&format!("layer{l}.bwd.{n}"), t));
        }
        for (task, head) in &self.heads {
            f(&format!("head.{task}.w"), head.weights.as_slice());
            f(&format!("head.{task}.b"), &head.bias);
        }
    }

    pub fn visit_tensors_mut<F: FnMut(&str, &mut [f64])>(&mut self, mut f: F) {
        f("embeddings", self.embeddings.as_mut_slice());
        for (l, layer) in self.layers.iter_mut().enumerate() {
            layer
                .forward
                .visit_mut(|n, t| f(&format!("layer{l}.fwd.{n}"), t));
            layer
                .backward
                .visit_mut(|n, t| f(&format!("layer{l}.bwd.{n}"), t));
        }
        for (task, head) in self.heads.iter_mut() {
            f(&format!("head.{task}.w"), head.weights.as_mut_slice());
            f(&format!("head.{task}.b"), &mut head.bias);
        }
    }

    /// Mutable views of every tensor, in visiting order.
    pub(crate) fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = vec![self.embeddings.as_mut_slice()];
        for layer in &mut self.layers {
            for cell in [&mut layer.forward, &mut layer.backward] {
                out.extend(cell.input.iter_mut().map(Matrix::as_mut_slice));
                out.extend(cell.recurrent.iter_mut().map(Matrix::as_mut_slice));
                out.extend(cell.bias.iter_mut().map(Vec::as_mut_slice));
            }
        }
        for head in self.heads.values_mut() {
            out.push(head.weights.as_mut_slice());
            out.push(&mut head.bias);
        }
        out
    }

    /// Noise-free mean log loss of a labeled sequence.
    pub fn loss(&self, seq: &EncodedSequence, task: &str) -> Result<f64> {
        let labels = seq
            .labels
            .as_ref()
            .ok_or_else(|| Error::Data("sequence has no gold labels".into()))?;
        let dist = self.infer(seq, task)?;
        let total: f64 = dist
            .probs
            .iter()
            .zip(labels)
            .map(|(p, l)| floored_nll(p[l.class()]))
            .sum();
        Ok(total / labels.len() as f64)
    }

    /// `(name, rows, cols)` of every tensor, in visiting order.
    pub fn tensor_shapes(&self) -> Vec<(String, usize, usize)> {
        let mut out = vec![(
            "embeddings".to_string(),
            self.embeddings.rows(),
            self.embeddings.cols(),
        )];
        for (l, layer) in self.layers.iter().enumerate() {
            for (dir, cell) in [("fwd", &layer.forward), ("bwd", &layer.backward)] {
                out.extend(
                    cell.shapes()
                        .into_iter()
                        .map(|(n, r, c)| (format!("layer{l}.{dir}.{n}"), r, c)),
                );
            }
        }
        for (task, head) in &self.heads {
            out.push((format!("head.{task}.w"), 2, head.weights.cols()));
            out.push((format!("head.{task}.b"), 1, 2));
        }
        out
    }

    fn head(&self, task: &str) -> Result<&OutputHead> {
        self.heads
            .get(task)
            .ok_or_else(|| Error::Task(task.to_string()))
    }

    fn check_ids(&self, seq: &EncodedSequence) -> Result<()> {
        if seq.is_empty() {
            return Err(Error::Data("empty sequence".into()));
        }
        let v = self.vocab_size();
        match seq.ids.iter().find(|&&i| i >= v) {
            Some(&i) => Err(Error::Vocab(format!(
                "symbol index {i} is outside the embedding table of size {v}"
            ))),
            None => Ok(()),
        }
    }

    /// Label distribution for every interleaved position.
    ///
    /// With `noise_sigma > 0` every embedding component receives fresh
    /// N(0, σ²) noise drawn from `rng`; with `noise_sigma == 0` the generator
    /// is not touched.
    pub fn forward<R: Rng + ?Sized>(
        &self,
        seq: &EncodedSequence,
        task: &str,
        noise_sigma: f64,
        rng: &mut R,
    ) -> Result<LabelDistribution> {
        let head = self.head(task)?;
        self.check_ids(seq)?;
        let noise = noise_source(noise_sigma)?;
        let trace = self.run(&seq.ids, head, noise.map(|n| (n, rng)));
        Ok(LabelDistribution {
            probs: trace.probs,
        })
    }

    /// Noise-free forward pass.
    pub fn infer(&self, seq: &EncodedSequence, task: &str) -> Result<LabelDistribution> {
        let head = self.head(task)?;
        self.check_ids(seq)?;
        let trace = self.run::<ChaCha8Rng>(&seq.ids, head, None);
        Ok(LabelDistribution {
            probs: trace.probs,
        })
    }

    /// Mean log loss over all positions and its gradient.
    ///
    /// Only the trunk and the head of `task` receive gradient; the gradient
    /// of every other head is zero.
    pub fn loss_and_grads<R: Rng + ?Sized>(
        &self,
        seq: &EncodedSequence,
        task: &str,
        noise_sigma: f64,
        rng: &mut R,
    ) -> Result<(f64, Gradients)> {
        let head = self.head(task)?;
        self.check_ids(seq)?;
        let labels = seq
            .labels
            .as_ref()
            .ok_or_else(|| Error::Data("sequence has no gold labels".into()))?;
        let noise = noise_source(noise_sigma)?;
        let trace = self.run(&seq.ids, head, noise.map(|n| (n, rng)));
        Ok(self.backward(task, head, &seq.ids, labels, &trace))
    }

    fn run<R: Rng + ?Sized>(
        &self,
        ids: &[usize],
        head: &OutputHead,
        mut noise: Option<(Normal<f64>, &mut R)>,
    ) -> Trace {
        let inputs: Vec<Vec<f64>> = ids
            .iter()
            .map(|&id| {
                let mut x = self.embeddings.row(id).to_vec();
                if let Some((dist, rng)) = noise.as_mut() {
                    x.iter_mut().for_each(|v| *v += dist.sample(&mut **rng));
                }
                x
            })
            .collect();

        let n = ids.len();
        let mut layers: Vec<LayerTrace> = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let below = layers.last().map_or(&inputs, |t| &t.output);
            let h = layer.forward.hidden();
            let zero = vec![0.0; h];

            let mut fwd: Vec<CellState> = Vec::with_capacity(n);
            for x in below.iter() {
                let (hp, cp) = fwd.last().map_or((&zero, &zero), |s| (&s.h, &s.c));
                let s = lstm_cell_forward(&layer.forward, x, hp, cp);
                fwd.push(s);
            }
            // bwd[t] holds the state at position t of the reversed pass.
            let mut bwd: Vec<Option<CellState>> = vec![None; n];
            for t in (0..n).rev() {
                let (hp, cp) = bwd
                    .get(t + 1)
                    .and_then(Option::as_ref)
                    .map_or((&zero, &zero), |s| (&s.h, &s.c));
                let s = lstm_cell_forward(&layer.backward, &below[t], hp, cp);
                bwd[t] = Some(s);
            }
            let bwd: Vec<CellState> = bwd.into_iter().map(Option::unwrap).collect();
            let output = fwd
                .iter()
                .zip(&bwd)
                .map(|(f, b)| {
                    let mut o = Vec::with_capacity(2 * h);
                    o.extend_from_slice(&f.h);
                    o.extend_from_slice(&b.h);
                    o
                })
                .collect();
            layers.push(LayerTrace { fwd, bwd, output });
        }

        let top = &layers.last().expect("at least one layer").output;
        let probs = top
            .iter()
            .map(|x| {
                let mut logits = head.bias.clone();
                head.weights.matvec_acc(x, &mut logits);
                softmax2(logits[0], logits[1])
            })
            .collect();
        Trace {
            inputs,
            layers,
            probs,
        }
    }

    fn backward(
        &self,
        task: &str,
        head: &OutputHead,
        ids: &[usize],
        labels: &[Label],
        trace: &Trace,
    ) -> (f64, Gradients) {
        let n = ids.len();
        let scale = 1.0 / n as f64;
        let mut grads = Gradients::zeros_like(self);
        let top = &trace.layers.last().expect("at least one layer").output;

        let mut loss = 0.0;
        let head_grad = grads.heads.get_mut(task).expect("head exists");
        let mut d_below: Vec<Vec<f64>> = vec![vec![0.0; top[0].len()]; n];
        for t in 0..n {
            let gold = labels[t].class();
            let p = trace.probs[t];
            let clamped = p[gold] < PROB_FLOOR;
            loss += floored_nll(p[gold]);
            if clamped {
                continue;
            }
            let mut dlogits = [p[0] * scale, p[1] * scale];
            dlogits[gold] -= scale;
            head_grad.weights.add_outer(&dlogits, &top[t]);
            axpy(1.0, &dlogits, &mut head_grad.bias);
            head.weights.matvec_t_acc(&dlogits, &mut d_below[t]);
        }
        loss *= scale;

        for (l, layer) in self.layers.iter().enumerate().rev() {
            let lt = &trace.layers[l];
            let below = if l == 0 {
                &trace.inputs
            } else {
                &trace.layers[l - 1].output
            };
            let h = layer.forward.hidden();
            let zero = vec![0.0; h];
            let mut d_input: Vec<Vec<f64>> = vec![vec![0.0; below[0].len()]; n];
            let lg = &mut grads.layers[l];

            // forward direction: gradients flow from t+1 to t
            let mut dh_next = vec![0.0; h];
            let mut dc_next = vec![0.0; h];
            for t in (0..n).rev() {
                let mut dh = d_below[t][..h].to_vec();
                axpy(1.0, &dh_next, &mut dh);
                let (hp, cp) = if t > 0 {
                    (&lt.fwd[t - 1].h, &lt.fwd[t - 1].c)
                } else {
                    (&zero, &zero)
                };
                let (dhp, dcp) = lstm_cell_backward(
                    &layer.forward,
                    &below[t],
                    hp,
                    cp,
                    &lt.fwd[t],
                    &dh,
                    &dc_next,
                    &mut lg.forward,
                    &mut d_input[t],
                );
                dh_next = dhp;
                dc_next = dcp;
            }

            // reversed direction: gradients flow from t-1 to t
            let mut dh_next = vec![0.0; h];
            let mut dc_next = vec![0.0; h];
            for t in 0..n {
                let mut dh = d_below[t][h..].to_vec();
                axpy(1.0, &dh_next, &mut dh);
                let (hp, cp) = if t + 1 < n {
                    (&lt.bwd[t + 1].h, &lt.bwd[t + 1].c)
                } else {
                    (&zero, &zero)
                };
                let (dhp, dcp) = lstm_cell_backward(
                    &layer.backward,
                    &below[t],
                    hp,
                    cp,
                    &lt.bwd[t],
                    &dh,
                    &dc_next,
                    &mut lg.backward,
                    &mut d_input[t],
                );
                dh_next = dhp;
                dc_next = dcp;
            }
            d_below = d_input;
        }

        for (t, &id) in ids.iter().enumerate() {
            let row = grads
                .embeddings
                .entry(id)
                .or_insert_with(|| vec![0.0; self.dim()]);
            axpy(1.0, &d_below[t], row);
        }
        (loss, grads)
    }

    /// Plain SGD update on the trunk and the head of `task`.
    ///
    /// Other heads are left untouched.
    pub fn apply_sgd(&mut self, grads: &Gradients, task: &str, learning_rate: f64) -> Result<()> {
        let head = self
            .heads
            .get_mut(task)
            .ok_or_else(|| Error::Task(task.to_string()))?;
        let hg = &grads.heads[task];
        axpy(-learning_rate, hg.weights.as_slice(), head.weights.as_mut_slice());
        axpy(-learning_rate, &hg.bias, &mut head.bias);
        for (&id, g) in &grads.embeddings {
            axpy(-learning_rate, g, self.embeddings.row_mut(id));
        }
        for (layer, lg) in self.layers.iter_mut().zip(&grads.layers) {
            layer.forward.add_scaled(-learning_rate, &lg.forward);
            layer.backward.add_scaled(-learning_rate, &lg.backward);
        }
        Ok(())
    }
}

fn noise_source(sigma: f64) -> Result<Option<Normal<f64>>> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::Config(format!("noise sigma must be finite and >= 0, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(None);
    }
    Normal::new(0.0, sigma)
        .map(Some)
        .map_err(|e| Error::Config(e.to_string()))
}

struct LayerTrace {
    fwd: Vec<CellState>,
    bwd: Vec<CellState>,
    output: Vec<Vec<f64>>,
}

struct Trace {
    inputs: Vec<Vec<f64>>,
    layers: Vec<LayerTrace>,
    probs: Vec<[f64; 2]>,
}

/// Gradient with the shape of [`ModelParams`]. Embedding rows are stored
/// sparsely: only rows used by the sequence are present.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub embeddings: BTreeMap<usize, Vec<f64>>,
    pub layers: Vec<BiLstmLayer>,
    pub heads: IndexMap<String, OutputHead>,
}

impl Gradients {
    pub fn zeros_like(model: &ModelParams) -> Self {
        let dense = ModelParams::zeros(
            0,
            model.dim(),
            model.hidden(),
            model.num_layers(),
            &model.tasks().collect::<Vec<_>>(),
        );
        Gradients {
            embeddings: BTreeMap::new(),
            layers: dense.layers,
            heads: dense.heads,
        }
    }

    /// Dense copy laid out exactly like `model`.
    pub fn to_dense(&self, model: &ModelParams) -> ModelParams {
        let mut embeddings = Matrix::zeros(model.vocab_size(), model.dim());
        for (&id, row) in &self.embeddings {
            embeddings.row_mut(id).copy_from_slice(row);
        }
        ModelParams {
            embeddings,
            layers: self.layers.clone(),
            heads: self.heads.clone(),
        }
    }

    pub fn scale(&mut self, factor: f64) {
        self.embeddings
            .values_mut()
            .flatten()
            .for_each(|v| *v *= factor);
        for layer in &mut self.layers {
            layer.forward.visit_mut(|_, t| t.iter_mut().for_each(|v| *v *= factor));
            layer.backward.visit_mut(|_, t| t.iter_mut().for_each(|v| *v *= factor));
        }
        for head in self.heads.values_mut() {
            head.weights.as_mut_slice().iter_mut().for_each(|v| *v *= factor);
            head.bias.iter_mut().for_each(|v| *v *= factor);
        }
    }
}

/// Builds and initializes a model for `config` over `vocab`.
///
/// All weights start in U[-0.1, 0.1] drawn from `config.seed`. Word rows of
/// the embedding table found in `pretrained` are then overwritten with the
/// first `config.dim` components of the pretrained vector.
pub fn build_model(
    config: &TrainingConfig,
    vocab: &Vocab,
    pretrained: Option<&EmbeddingTable>,
) -> Result<ModelParams> {
    config.validate_shape()?;
    if vocab.is_empty() {
        return Err(Error::Config("vocabulary is empty".into()));
    }
    let (d, h) = (config.dim, config.hidden);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let embeddings = Matrix::uniform(vocab.len(), d, INIT_SCALE, &mut rng);
    let layers = (0..config.layers)
        .map(|l| {
            let input = if l == 0 { d } else { 2 * h };
            BiLstmLayer {
                forward: LstmCellParams::uniform(input, h, INIT_SCALE, &mut rng),
                backward: LstmCellParams::uniform(input, h, INIT_SCALE, &mut rng),
            }
        })
        .collect();
    let mut heads = IndexMap::new();
    for task in &config.tasks {
        let head = OutputHead {
            weights: Matrix::uniform(2, 2 * h, INIT_SCALE, &mut rng),
            bias: (0..2)
                .map(|_| rng.random_range(-INIT_SCALE..=INIT_SCALE))
                .collect(),
        };
        if heads.insert(task.clone(), head).is_some() {
            return Err(Error::Config(format!("duplicate task name `{task}`")));
        }
    }
    let mut model = ModelParams {
        embeddings,
        layers,
        heads,
    };
    if let Some(table) = pretrained {
        if table.dim() < d {
            return Err(Error::Format(format!(
                "pretrained embeddings have {} dimensions, the model needs {d}",
                table.dim()
            )));
        }
        for (id, word) in vocab.words() {
            if let Some(v) = table.get(word) {
                model.embeddings.row_mut(id).copy_from_slice(&v[..d]);
            }
        }
    }
    Ok(model)
}

/// Labels one document: argmax per word position, first token forced to B.
pub fn predict(model: &ModelParams, doc: &Document, vocab: &Vocab, task: &str) -> Result<Vec<Label>> {
    if doc.is_empty() {
        return Err(Error::Data(format!("document `{}` is empty", doc.id)));
    }
    let seq = encode_document(doc, vocab)?;
    let dist = model.infer(&seq, task)?;
    Ok(labels_from_distribution(&dist, &seq.token_mask))
}

/// Keeps the word positions of an argmax decoding and forces the first label
/// to B.
pub fn labels_from_distribution(dist: &LabelDistribution, token_mask: &[bool]) -> Vec<Label> {
    let mut labels: Vec<Label> = dist
        .argmax()
        .into_iter()
        .zip(token_mask)
        .filter_map(|(l, &word)| word.then_some(l))
        .collect();
    if let Some(first) = labels.first_mut() {
        *first = Label::B;
    }
    labels
}
