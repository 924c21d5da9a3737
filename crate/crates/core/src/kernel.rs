//! Dense numerical kernel: row-major matrices, the LSTM cell with its
//! backward pass, softmax and the logistic loss.
//!
//! Everything here works on `f64` and is allocation-light. Vectors are plain
//! `Vec<f64>` / `&[f64]`.

use rand::Rng;

use crate::error::{Error, Result};

mod gradcheck;

pub use gradcheck::{grad_check, GradCheckReport};

/// Lower bound applied to the gold probability before taking its log.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Entries drawn independently from U[-scale, scale].
    pub fn uniform<R: Rng + ?Sized>(rows: usize, cols: usize, scale: f64, rng: &mut R) -> Self {
        let data = (0..rows * cols)
            .map(|_| rng.random_range(-scale..=scale))
            .collect();
        Matrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// `out += self · x`
    pub fn matvec_acc(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        for (o, row) in out.iter_mut().zip(self.data.chunks_exact(self.cols)) {
            *o += dot(row, x);
        }
    }

    /// `out += selfᵀ · y`
    pub fn matvec_t_acc(&self, y: &[f64], out: &mut [f64]) {
        debug_assert_eq!(y.len(), self.rows);
        debug_assert_eq!(out.len(), self.cols);
        for (&yr, row) in y.iter().zip(self.data.chunks_exact(self.cols)) {
            if yr != 0.0 {
                axpy(yr, row, out);
            }
        }
    }

    /// `self += y ⊗ x`
    pub fn add_outer(&mut self, y: &[f64], x: &[f64]) {
        debug_assert_eq!(y.len(), self.rows);
        debug_assert_eq!(x.len(), self.cols);
        for (&yr, row) in y.iter().zip(self.data.chunks_exact_mut(self.cols)) {
            if yr != 0.0 {
                axpy(yr, x, row);
            }
        }
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `y += alpha · x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    Input = 0,
    Forget = 1,
    Cell = 2,
    Output = 3,
}

impl Gate {
    pub const ALL: [Gate; 4] = [Gate::Input, Gate::Forget, Gate::Cell, Gate::Output];

    pub fn name(self) -> &'static str {
        match self {
            Gate::Input => "i",
            Gate::Forget => "f",
            Gate::Cell => "c",
            Gate::Output => "o",
        }
    }
}

/// Parameters of a standard four-gate LSTM cell without peepholes.
///
/// `input[g]` is `hidden × input_dim`, `recurrent[g]` is `hidden × hidden`
/// and `bias[g]` has length `hidden`, for each gate `g` in [`Gate::ALL`]
/// order.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmCellParams {
    pub input: [Matrix; 4],
    pub recurrent: [Matrix; 4],
    pub bias: [Vec<f64>; 4],
}

impl LstmCellParams {
    pub fn zeros(input_dim: usize, hidden: usize) -> Self {
        LstmCellParams {
            input: std::array::from_fn(|_| Matrix::zeros(hidden, input_dim)),
            recurrent: std::array::from_fn(|_| Matrix::zeros(hidden, hidden)),
            bias: std::array::from_fn(|_| vec![0.0; hidden]),
        }
    }

    pub fn uniform<R: Rng + ?Sized>(input_dim: usize, hidden: usize, scale: f64, rng: &mut R) -> Self {
        let input = std::array::from_fn(|_| Matrix::uniform(hidden, input_dim, scale, rng));
        let recurrent = std::array::from_fn(|_| Matrix::uniform(hidden, hidden, scale, rng));
        let bias = std::array::from_fn(|_| {
            (0..hidden)
                .map(|_| rng.random_range(-scale..=scale))
                .collect()
        });
        LstmCellParams {
            input,
            recurrent,
            bias,
        }
    }

    pub fn hidden(&self) -> usize {
        self.bias[0].len()
    }

    pub fn input_dim(&self) -> usize {
        self.input[0].cols()
    }

    pub fn parameter_count(&self) -> usize {
        let h = self.hidden();
        4 * (h * self.input_dim() + h * h + h)
    }

    /// `self += alpha · other`
    pub fn add_scaled(&mut self, alpha: f64, other: &LstmCellParams) {
        for g in 0..4 {
            axpy(alpha, other.input[g].as_slice(), self.input[g].as_mut_slice());
            axpy(alpha, other.recurrent[g].as_slice(), self.recurrent[g].as_mut_slice());
            axpy(alpha, &other.bias[g], &mut self.bias[g]);
        }
    }

    /// Checks that all twelve tensors agree on `hidden` and `input_dim`.
    pub fn validate(&self) -> Result<()> {
        let h = self.hidden();
        let d = self.input_dim();
        for g in Gate::ALL {
            let gi = g as usize;
            if self.input[gi].shape() != (h, d) {
                return Err(Error::Shape(format!(
                    "input weights of gate {} are {:?}, expected {:?}",
                    g.name(),
                    self.input[gi].shape(),
                    (h, d)
                )));
            }
            if self.recurrent[gi].shape() != (h, h) {
                return Err(Error::Shape(format!(
                    "recurrent weights of gate {} are {:?}, expected {:?}",
                    g.name(),
                    self.recurrent[gi].shape(),
                    (h, h)
                )));
            }
            if self.bias[gi].len() != h {
                return Err(Error::Shape(format!(
                    "bias of gate {} has length {}, expected {h}",
                    g.name(),
                    self.bias[gi].len()
                )));
            }
        }
        Ok(())
    }

    /// Visits the twelve tensors in a fixed order with a stable suffix name.
    pub fn visit<F: FnMut(String, &[f64])>(&self, mut f: F) {
        for g in Gate::ALL {
            f(format!("wx_{}", g.name()), self.input[g as usize].as_slice());
        }
        for g in Gate::ALL {
            f(format!("wh_{}", g.name()), self.recurrent[g as usize].as_slice());
        }
        for g in Gate::ALL {
            f(format!("b_{}", g.name()), &self.bias[g as usize]);
        }
    }

    pub fn visit_mut<F: FnMut(String, &mut [f64])>(&mut self, mut f: F) {
        for g in Gate::ALL {
            f(format!("wx_{}", g.name()), self.input[g as usize].as_mut_slice());
        }
        for g in Gate::ALL {
            f(format!("wh_{}", g.name()), self.recurrent[g as usize].as_mut_slice());
        }
        for g in Gate::ALL {
            f(format!("b_{}", g.name()), &mut self.bias[g as usize]);
        }
    }

    /// Tensor shapes in [`visit`](Self::visit) order.
    pub fn shapes(&self) -> Vec<(String, usize, usize)> {
        let h = self.hidden();
        let d = self.input_dim();
        let mut out = Vec::with_capacity(12);
        for g in Gate::ALL {
            out.push((format!("wx_{}", g.name()), h, d));
        }
        for g in Gate::ALL {
            out.push((format!("wh_{}", g.name()), h, h));
        }
        for g in Gate::ALL {
            out.push((format!("b_{}", g.name()), 1, h));
        }
        out
    }
}

/// Everything the backward pass needs from one cell application.
#[derive(Debug, Clone)]
pub struct CellState {
    /// Post-activation gate values in [`Gate::ALL`] order.
    pub gates: [Vec<f64>; 4],
    pub c: Vec<f64>,
    pub tanh_c: Vec<f64>,
    pub h: Vec<f64>,
}

/// One LSTM step: returns `(h_t, c_t)`.
pub fn lstm_cell_step(
    params: &LstmCellParams,
    x: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    params.validate()?;
    let h = params.hidden();
    if x.len() != params.input_dim() {
        return Err(Error::Shape(format!(
            "input x_t has length {}, cell input weights expect {}",
            x.len(),
            params.input_dim()
        )));
    }
    if h_prev.len() != h {
        return Err(Error::Shape(format!(
            "h_prev has length {}, cell hidden size is {h}",
            h_prev.len()
        )));
    }
    if c_prev.len() != h {
        return Err(Error::Shape(format!(
            "c_prev has length {}, cell hidden size is {h}",
            c_prev.len()
        )));
    }
    let state = lstm_cell_forward(params, x, h_prev, c_prev);
    Ok((state.h, state.c))
}

/// Unchecked forward step that keeps the intermediate values.
pub fn lstm_cell_forward(
    params: &LstmCellParams,
    x: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
) -> CellState {
    let gates: [Vec<f64>; 4] = std::array::from_fn(|g| {
        let mut pre = params.bias[g].clone();
        params.input[g].matvec_acc(x, &mut pre);
        params.recurrent[g].matvec_acc(h_prev, &mut pre);
        if g == Gate::Cell as usize {
            pre.iter_mut().for_each(|v| *v = v.tanh());
        } else {
            pre.iter_mut().for_each(|v| *v = sigmoid(*v));
        }
        pre
    });
    let [i, f, g, o] = &gates;
    let c: Vec<f64> = (0..c_prev.len())
        .map(|k| f[k] * c_prev[k] + i[k] * g[k])
        .collect();
    let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
    let h = o.iter().zip(&tanh_c).map(|(o, t)| o * t).collect();
    CellState {
        gates,
        c,
        tanh_c,
        h,
    }
}

/// Backward pass of one cell step.
///
/// `dh` and `dc` are the upstream gradients with respect to `h_t` and `c_t`.
/// Parameter gradients are accumulated into `grads` and the input gradient
/// into `dx`. Returns `(dh_prev, dc_prev)`.
#[allow(clippy::too_many_arguments)]
pub fn lstm_cell_backward(
    params: &LstmCellParams,
    x: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
    state: &CellState,
    dh: &[f64],
    dc: &[f64],
    grads: &mut LstmCellParams,
    dx: &mut [f64],
) -> (Vec<f64>, Vec<f64>) {
    let hidden = dh.len();
    let [i, f, g, o] = &state.gates;
    let mut pre = [
        vec![0.0; hidden],
        vec![0.0; hidden],
        vec![0.0; hidden],
        vec![0.0; hidden],
    ];
    let mut dc_prev = vec![0.0; hidden];
    for k in 0..hidden {
        let t = state.tanh_c[k];
        let d_o = dh[k] * t;
        let d_c = dc[k] + dh[k] * o[k] * (1.0 - t * t);
        let d_i = d_c * g[k];
        let d_g = d_c * i[k];
        let d_f = d_c * c_prev[k];
        dc_prev[k] = d_c * f[k];
        pre[Gate::Input as usize][k] = d_i * i[k] * (1.0 - i[k]);
        pre[Gate::Forget as usize][k] = d_f * f[k] * (1.0 - f[k]);
        pre[Gate::Cell as usize][k] = d_g * (1.0 - g[k] * g[k]);
        pre[Gate::Output as usize][k] = d_o * o[k] * (1.0 - o[k]);
    }
    let mut dh_prev = vec![0.0; hidden];
    for (gi, da) in pre.iter().enumerate() {
        grads.input[gi].add_outer(da, x);
        grads.recurrent[gi].add_outer(da, h_prev);
        axpy(1.0, da, &mut grads.bias[gi]);
        params.input[gi].matvec_t_acc(da, dx);
        params.recurrent[gi].matvec_t_acc(da, &mut dh_prev);
    }
    (dh_prev, dc_prev)
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Result<Vec<f64>> {
    if logits.is_empty() {
        return Err(Error::Contract("softmax of an empty vector".into()));
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / sum).collect())
}

/// Two-class softmax used on the hot path.
pub(crate) fn softmax2(a: f64, b: f64) -> [f64; 2] {
    let m = a.max(b);
    let ea = (a - m).exp();
    let eb = (b - m).exp();
    let s = ea + eb;
    [ea / s, eb / s]
}

/// `-ln(probs[gold])` with the probability floored at [`PROB_FLOOR`].
pub fn log_loss(probs: &[f64], gold: usize) -> Result<f64> {
    let p = probs.get(gold).ok_or(Error::Index {
        what: "class probabilities",
        index: gold,
        len: probs.len(),
    })?;
    Ok(floored_nll(*p))
}

/// `-ln(max(p, PROB_FLOOR))`, except that NaN stays NaN.
pub(crate) fn floored_nll(p: f64) -> f64 {
    -(if p < PROB_FLOOR { PROB_FLOOR } else { p }).ln()
}
