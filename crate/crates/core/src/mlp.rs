//! Two-layer perceptron trained by full-batch gradient descent.
//!
//! The network computes `y = softmax(W2·f(W1·x + b1) + b2)` and is trained on
//! the per-class binary cross-entropy summed over all output nodes:
//!
//! ```text
//! L = −(1/N) Σ_i Σ_j [ y_ij·log ŷ_ij + (1 − y_ij)·log(1 − ŷ_ij) ]
//! ```
//!
//! A model can have its first layer frozen, either because it was copied from
//! another trained network ([`freeze_transfer`]) or because the first layer is
//! a fixed identity map ([`single_layer`]).

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::matrix::Matrix;
use crate::rng::{standard_normal, stream, StreamRng};

/// Probabilities are clamped into `[PROB_CLAMP, 1 − PROB_CLAMP]` before taking logs.
pub const PROB_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    Logistic,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => libm::tanh(z),
            Activation::Logistic => 1.0 / (1.0 + libm::exp(-z)),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the activation's output `a = f(z)`.
    #[inline]
    fn derivative_at_output(self, a: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - a * a,
            Activation::Logistic => a * (1.0 - a),
            Activation::Identity => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputActivation {
    #[default]
    Softmax,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MlpParts", into = "MlpParts")]
pub struct MlpModel {
    w1: Matrix,
    b1: Vec<f64>,
    w2: Matrix,
    b2: Vec<f64>,
    hidden_activation: Activation,
    output_activation: OutputActivation,
    frozen_first_layer: bool,
}

/// JSON layout of a model: dimensions plus row-major parameter arrays.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MlpParts {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub output_dim: usize,
    pub hidden_activation: Activation,
    pub output_activation: OutputActivation,
    pub frozen_first_layer: bool,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

impl From<MlpModel> for MlpParts {
    fn from(m: MlpModel) -> Self {
        MlpParts {
            input_dim: m.input_dim(),
            hidden_dim: m.hidden_dim(),
            output_dim: m.output_dim(),
            hidden_activation: m.hidden_activation,
            output_activation: m.output_activation,
            frozen_first_layer: m.frozen_first_layer,
            w1: m.w1.as_slice().to_vec(),
            b1: m.b1,
            w2: m.w2.as_slice().to_vec(),
            b2: m.b2,
        }
    }
}

impl TryFrom<MlpParts> for MlpModel {
    type Error = Error;

    fn try_from(p: MlpParts) -> Result<Self> {
        MlpModel::from_parts(
            Matrix::from_vec(p.hidden_dim, p.input_dim, p.w1)?,
            p.b1,
            Matrix::from_vec(p.output_dim, p.hidden_dim, p.w2)?,
            p.b2,
            p.hidden_activation,
            p.frozen_first_layer,
        )
    }
}

impl MlpModel {
    pub fn from_parts(
        w1: Matrix,
        b1: Vec<f64>,
        w2: Matrix,
        b2: Vec<f64>,
        hidden_activation: Activation,
        frozen_first_layer: bool,
    ) -> Result<Self> {
        let (h, d, c) = (w1.rows(), w1.cols(), w2.rows());
        if d == 0 || h == 0 || c == 0 {
            return Err(Error::precondition("network dimensions must be positive"));
        }
        if b1.len() != h {
            return Err(Error::dimension("b1", h, b1.len()));
        }
        if w2.cols() != h {
            return Err(Error::dimension("w2 columns", h, w2.cols()));
        }
        if b2.len() != c {
            return Err(Error::dimension("b2", c, b2.len()));
        }
        let finite = w1.is_finite() && w2.is_finite() && b1.iter().chain(&b2).all(|v| v.is_finite());
        if !finite {
            return Err(Error::NonFiniteInput);
        }
        Ok(MlpModel {
            w1,
            b1,
            w2,
            b2,
            hidden_activation,
            output_activation: OutputActivation::Softmax,
            frozen_first_layer,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.w1.cols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w1.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.w2.rows()
    }

    pub fn w1(&self) -> &Matrix {
        &self.w1
    }

    pub fn b1(&self) -> &[f64] {
        &self.b1
    }

    pub fn w2(&self) -> &Matrix {
        &self.w2
    }

    pub fn b2(&self) -> &[f64] {
        &self.b2
    }

    pub fn hidden_activation(&self) -> Activation {
        self.hidden_activation
    }

    pub fn output_activation(&self) -> OutputActivation {
        self.output_activation
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen_first_layer
    }

    /// Weights plus biases of both layers.
    pub fn parameter_count(&self) -> usize {
        let (d, h, c) = (self.input_dim(), self.hidden_dim(), self.output_dim());
        h * d + h + c * h + c
    }

    pub fn trainable_parameter_count(&self) -> usize {
        let (h, c) = (self.hidden_dim(), self.output_dim());
        if self.frozen_first_layer {
            c * h + c
        } else {
            self.parameter_count()
        }
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::dimension("network input", self.input_dim(), x.len()));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput);
        }
        Ok(())
    }

    fn hidden_into(&self, x: &[f64], out: &mut [f64]) {
        for (m, a) in out.iter_mut().enumerate() {
            let z: f64 = self.w1.row(m).iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.b1[m];
            *a = self.hidden_activation.apply(z);
        }
    }

    fn logits_into(&self, hidden: &[f64], out: &mut [f64]) {
        for (k, z) in out.iter_mut().enumerate() {
            *z = self.w2.row(k).iter().zip(hidden).map(|(w, a)| w * a).sum::<f64>() + self.b2[k];
        }
    }

    /// Hidden-layer activations `f(W1·x + b1)`.
    pub fn hidden(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut a = vec![0.0; self.hidden_dim()];
        self.hidden_into(x, &mut a);
        Ok(a)
    }

    /// Hidden activations for every row of `x`.
    pub fn hidden_batch(&self, x: &Matrix) -> Result<Matrix> {
        let mut out = Matrix::zeros(x.rows(), self.hidden_dim());
        for (i, row) in x.row_iter().enumerate() {
            self.check_input(row)?;
            self.hidden_into(row, out.row_mut(i));
        }
        Ok(out)
    }

    pub fn logits(&self, x: &[f64]) -> Result<Vec<f64>> {
        let a = self.hidden(x)?;
        let mut z = vec![0.0; self.output_dim()];
        self.logits_into(&a, &mut z);
        Ok(z)
    }

    /// Class-membership probabilities.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut z = self.logits(x)?;
        softmax_in_place(&mut z);
        Ok(z)
    }

    pub fn forward_batch(&self, x: &Matrix) -> Result<Matrix> {
        let mut out = Matrix::zeros(x.rows(), self.output_dim());
        let mut a = vec![0.0; self.hidden_dim()];
        for (i, row) in x.row_iter().enumerate() {
            self.check_input(row)?;
            self.hidden_into(row, &mut a);
            let z = out.row_mut(i);
            self.logits_into(&a, z);
            softmax_in_place(z);
        }
        Ok(out)
    }

    /// Output index with the largest probability; ties go to the lowest index.
    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax(&self.forward(x)?))
    }
}

/// Max-subtracted softmax.
pub fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = libm::exp(*v - max);
        sum += *v;
    }
    for v in z.iter_mut() {
        *v /= sum;
    }
}

/// First index of the maximum value.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

fn draw_normal_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, std: f64, rng: &mut R) -> Matrix {
    let data = (0..rows * cols).map(|_| std * standard_normal(rng)).collect();
    Matrix::from_vec(rows, cols, data).expect("sized by construction")
}

fn draw_normal_vec<R: Rng + ?Sized>(n: usize, std: f64, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| std * standard_normal(rng)).collect()
}

fn check_init(dims: &[usize], init_std: f64) -> Result<()> {
    if dims.iter().any(|&n| n == 0) {
        return Err(Error::precondition("network dimensions must be ≥ 1"));
    }
    if !(init_std > 0.0 && init_std.is_finite()) {
        return Err(Error::precondition(format!("init_std {init_std} must be positive")));
    }
    Ok(())
}

/// Fresh tanh network with all parameters i.i.d. `Normal(0, init_std²)`,
/// drawn in the order W1, b1, W2, b2.
pub fn init_random<R: Rng + ?Sized>(d: usize, h: usize, c: usize, init_std: f64, rng: &mut R) -> Result<MlpModel> {
    init_with_activation(d, h, c, Activation::Tanh, init_std, rng)
}

pub fn init_with_activation<R: Rng + ?Sized>(
    d: usize,
    h: usize,
    c: usize,
    hidden_activation: Activation,
    init_std: f64,
    rng: &mut R,
) -> Result<MlpModel> {
    check_init(&[d, h, c], init_std)?;
    let w1 = draw_normal_matrix(h, d, init_std, rng);
    let b1 = draw_normal_vec(h, init_std, rng);
    let w2 = draw_normal_matrix(c, h, init_std, rng);
    let b2 = draw_normal_vec(c, init_std, rng);
    MlpModel::from_parts(w1, b1, w2, b2, hidden_activation, false)
}

/// Copies `source`'s first layer bit-for-bit, freezes it, and attaches a fresh
/// `c_target`-way output layer (W2 then b2 drawn from `rng`).
pub fn freeze_transfer<R: Rng + ?Sized>(
    source: &MlpModel,
    c_target: usize,
    init_std: f64,
    rng: &mut R,
) -> Result<MlpModel> {
    if c_target < 2 {
        return Err(Error::precondition(format!("transfer target needs ≥ 2 classes, got {c_target}")));
    }
    check_init(&[c_target], init_std)?;
    let h = source.hidden_dim();
    let w2 = draw_normal_matrix(c_target, h, init_std, rng);
    let b2 = draw_normal_vec(c_target, init_std, rng);
    MlpModel::from_parts(
        source.w1.clone(),
        source.b1.clone(),
        w2,
        b2,
        source.hidden_activation,
        true,
    )
}

/// Network with no hidden layer: inputs feed the softmax layer directly.
///
/// Represented as a frozen identity first layer, so the output-layer draws
/// match [`freeze_transfer`] for the same rng state when `d` equals the
/// source hidden width.
pub fn single_layer<R: Rng + ?Sized>(d: usize, c: usize, init_std: f64, rng: &mut R) -> Result<MlpModel> {
    check_init(&[d, c], init_std)?;
    let w2 = draw_normal_matrix(c, d, init_std, rng);
    let b2 = draw_normal_vec(c, init_std, rng);
    MlpModel::from_parts(Matrix::identity(d), vec![0.0; d], w2, b2, Activation::Identity, true)
}

/// Eq.-3 loss of a probability batch against one-hot (or soft) targets.
pub fn loss(probabilities: &Matrix, targets: &Matrix) -> Result<f64> {
    if probabilities.rows() != targets.rows() || probabilities.cols() != targets.cols() {
        return Err(Error::dimension("loss targets", probabilities.as_slice().len(), targets.as_slice().len()));
    }
    let n = probabilities.rows();
    if n == 0 {
        return Err(Error::precondition("empty batch"));
    }
    let mut total = 0.0;
    for (p_row, y_row) in probabilities.row_iter().zip(targets.row_iter()) {
        for (&p, &y) in p_row.iter().zip(y_row) {
            total += cross_entropy_term(p, y);
        }
    }
    Ok(-(total / n as f64))
}

#[inline]
fn cross_entropy_term(p: f64, y: f64) -> f64 {
    let p = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
    y * libm::log(p) + (1.0 - y) * libm::log(1.0 - p)
}

/// Loss for integer class labels (output indices).
pub fn loss_for_labels(probabilities: &Matrix, labels: &[usize]) -> Result<f64> {
    if probabilities.rows() != labels.len() {
        return Err(Error::dimension("labels", probabilities.rows(), labels.len()));
    }
    if labels.is_empty() {
        return Err(Error::precondition("empty batch"));
    }
    let mut total = 0.0;
    for (p_row, &label) in probabilities.row_iter().zip(labels) {
        for (j, &p) in p_row.iter().enumerate() {
            let y = if j == label { 1.0 } else { 0.0 };
            total += cross_entropy_term(p, y);
        }
    }
    Ok(-(total / labels.len() as f64))
}

/// Inputs with integer labels in `0..output_dim`.
#[derive(Debug, Clone, Copy)]
pub struct Batch<'a> {
    pub x: &'a Matrix,
    pub labels: &'a [usize],
}

impl<'a> Batch<'a> {
    pub fn new(x: &'a Matrix, labels: &'a [usize]) -> Result<Self> {
        if x.rows() != labels.len() {
            return Err(Error::dimension("batch labels", x.rows(), labels.len()));
        }
        Ok(Batch { x, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    fn check(&self, model: &MlpModel) -> Result<()> {
        if self.is_empty() {
            return Err(Error::precondition("empty batch"));
        }
        if self.x.cols() != model.input_dim() {
            return Err(Error::dimension("batch input width", model.input_dim(), self.x.cols()));
        }
        if let Some(&bad) = self.labels.iter().find(|&&l| l >= model.output_dim()) {
            return Err(Error::bounds(format!(
                "label index {bad} for a {}-output network",
                model.output_dim()
            )));
        }
        Ok(())
    }
}

/// Parameter gradients; the first-layer entries are absent for frozen models.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub w1: Option<Matrix>,
    pub b1: Option<Vec<f64>>,
    pub w2: Matrix,
    pub b2: Vec<f64>,
}

impl Gradient {
    fn zeros_like(model: &MlpModel) -> Self {
        let (d, h, c) = (model.input_dim(), model.hidden_dim(), model.output_dim());
        let trainable_first = !model.frozen_first_layer;
        Gradient {
            w1: trainable_first.then(|| Matrix::zeros(h, d)),
            b1: trainable_first.then(|| vec![0.0; h]),
            w2: Matrix::zeros(c, h),
            b2: vec![0.0; c],
        }
    }
}

/// Analytic gradient of the batch loss with respect to every trainable parameter.
pub fn grad(model: &MlpModel, batch: Batch<'_>) -> Result<Gradient> {
    batch.check(model)?;
    let mut g = Gradient::zeros_like(model);
    let mut ws = Workspace::new(model);
    accumulate_gradient(model, batch, &mut ws, &mut g)?;
    Ok(g)
}

struct Workspace {
    hidden: Vec<f64>,
    probs: Vec<f64>,
    d_out: Vec<f64>,
    d_hidden: Vec<f64>,
}

impl Workspace {
    fn new(model: &MlpModel) -> Self {
        Workspace {
            hidden: vec![0.0; model.hidden_dim()],
            probs: vec![0.0; model.output_dim()],
            d_out: vec![0.0; model.output_dim()],
            d_hidden: vec![0.0; model.hidden_dim()],
        }
    }
}

fn accumulate_gradient(model: &MlpModel, batch: Batch<'_>, ws: &mut Workspace, g: &mut Gradient) -> Result<()> {
    let inv_n = 1.0 / batch.len() as f64;
    for (x, &label) in batch.x.row_iter().zip(batch.labels) {
        model.check_input(x)?;
        model.hidden_into(x, &mut ws.hidden);
        model.logits_into(&ws.hidden, &mut ws.probs);
        softmax_in_place(&mut ws.probs);

        // dL/dp_j, zero where the clamp is active
        let mut weighted = 0.0;
        for (j, (&p, dj)) in ws.probs.iter().zip(ws.d_out.iter_mut()).enumerate() {
            *dj = if !(PROB_CLAMP..=1.0 - PROB_CLAMP).contains(&p) {
                0.0
            } else if j == label {
                -1.0 / p
            } else {
                1.0 / (1.0 - p)
            };
            weighted += *dj * p;
        }
        // softmax Jacobian: dL/dz_k = p_k (g_k − Σ_j g_j p_j)
        for (dk, &p) in ws.d_out.iter_mut().zip(&ws.probs) {
            *dk = p * (*dk - weighted) * inv_n;
        }

        for (k, &dk) in ws.d_out.iter().enumerate() {
            g.b2[k] += dk;
            for (gw, &a) in g.w2.row_mut(k).iter_mut().zip(&ws.hidden) {
                *gw += dk * a;
            }
        }

        if let (Some(gw1), Some(gb1)) = (g.w1.as_mut(), g.b1.as_mut()) {
            for (m, dm) in ws.d_hidden.iter_mut().enumerate() {
                let back: f64 = (0..model.output_dim()).map(|k| model.w2[(k, m)] * ws.d_out[k]).sum();
                *dm = back * model.hidden_activation.derivative_at_output(ws.hidden[m]);
            }
            for (m, &dm) in ws.d_hidden.iter().enumerate() {
                gb1[m] += dm;
                for (gw, &xv) in gw1.row_mut(m).iter_mut().zip(x) {
                    *gw += dm * xv;
                }
            }
        }
    }
    Ok(())
}

fn apply_step(model: &mut MlpModel, g: &Gradient, learning_rate: f64) {
    let step = |params: &mut [f64], grads: &[f64]| {
        for (p, gr) in params.iter_mut().zip(grads) {
            *p -= learning_rate * gr;
        }
    };
    step(model.w2.as_mut_slice(), g.w2.as_slice());
    step(&mut model.b2, &g.b2);
    if !model.frozen_first_layer {
        if let (Some(gw1), Some(gb1)) = (&g.w1, &g.b1) {
            step(model.w1.as_mut_slice(), gw1.as_slice());
            step(&mut model.b1, gb1);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub max_epochs: usize,
    /// Relative validation-loss improvement below which an epoch counts as stalled.
    pub early_stop_rel: f64,
    pub early_stop_patience: usize,
    pub restarts: usize,
    pub init_std: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.05,
            max_epochs: 1000,
            early_stop_rel: 1e-3,
            early_stop_patience: 5,
            restarts: 5,
            init_std: 0.1,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("learning_rate", "must be positive"));
        }
        if self.max_epochs == 0 {
            return Err(Error::config("max_epochs", "must be ≥ 1"));
        }
        if self.restarts == 0 {
            return Err(Error::config("restarts", "must be ≥ 1"));
        }
        if !(0.0..1.0).contains(&self.early_stop_rel) {
            return Err(Error::config("early_stop_rel", "must lie in [0, 1)"));
        }
        if !(self.init_std > 0.0) {
            return Err(Error::config("init_std", "must be positive"));
        }
        Ok(())
    }
}

/// Per-epoch losses; entry `e − 1` holds the losses after epoch `e`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossHistory {
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    /// Number of epochs actually run.
    pub stopped_epoch: usize,
    /// 1-based epoch whose parameters were returned.
    pub best_epoch: usize,
}

impl LossHistory {
    pub fn best_val_loss(&self) -> f64 {
        self.val_loss[self.best_epoch - 1]
    }
}

fn batch_loss(model: &MlpModel, batch: Batch<'_>) -> Result<f64> {
    loss_for_labels(&model.forward_batch(batch.x)?, batch.labels)
}

/// Full-batch gradient descent with relative-improvement early stopping.
///
/// Returns the parameters of the epoch with the lowest validation loss.
pub fn train(mut model: MlpModel, train_set: Batch<'_>, val_set: Batch<'_>, config: &TrainConfig) -> Result<(MlpModel, LossHistory)> {
    config.validate()?;
    train_set.check(&model)?;
    val_set.check(&model)?;

    let mut ws = Workspace::new(&model);
    let mut history = LossHistory {
        train_loss: Vec::new(),
        val_loss: Vec::new(),
        stopped_epoch: 0,
        best_epoch: 0,
    };
    let mut best = model.clone();
    let mut best_val = f64::INFINITY;
    let mut prev_val = batch_loss(&model, val_set)?;
    let mut stalled = 0;

    for epoch in 1..=config.max_epochs {
        let mut g = Gradient::zeros_like(&model);
        accumulate_gradient(&model, train_set, &mut ws, &mut g)?;
        apply_step(&mut model, &g, config.learning_rate);

        let train_loss = batch_loss(&model, train_set)?;
        let val_loss = batch_loss(&model, val_set)?;
        if !train_loss.is_finite() || !val_loss.is_finite() {
            return Err(Error::Divergence {
                epoch,
                learning_rate: config.learning_rate,
            });
        }
        history.train_loss.push(train_loss);
        history.val_loss.push(val_loss);
        history.stopped_epoch = epoch;
        if val_loss < best_val {
            best_val = val_loss;
            best.clone_from(&model);
            history.best_epoch = epoch;
        }

        let improvement = (prev_val - val_loss) / prev_val;
        prev_val = val_loss;
        if improvement < config.early_stop_rel {
            stalled += 1;
            if stalled >= config.early_stop_patience.max(1) {
                break;
            }
        } else {
            stalled = 0;
        }
    }
    if history.best_epoch == 0 {
        // loss never dropped below +inf; cannot happen with finite losses
        return Err(Error::Divergence {
            epoch: history.stopped_epoch,
            learning_rate: config.learning_rate,
        });
    }
    Ok((best, history))
}

/// Stream used by restart `index` of a multi-restart run.
pub fn restart_rng(seed: u64, index: usize) -> StreamRng {
    stream(seed, index as u64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RestartOutcome {
    pub model: MlpModel,
    pub history: LossHistory,
    pub restart_index: usize,
    /// Best validation loss per restart; `None` for diverged runs.
    pub restart_val_losses: Vec<Option<f64>>,
}

/// Trains `config.restarts` independently initialised networks and keeps the
/// one with the lowest validation loss (ties go to the earliest restart).
pub fn multi_restart_train<E: Executor>(
    d: usize,
    h: usize,
    c: usize,
    train_set: Batch<'_>,
    val_set: Batch<'_>,
    config: &TrainConfig,
    exec: &E,
) -> Result<RestartOutcome> {
    config.validate()?;
    let runs = exec.map(config.restarts, |r| {
        let mut rng = restart_rng(config.seed, r);
        let model = init_random(d, h, c, config.init_std, &mut rng)?;
        train(model, train_set, val_set, config)
    });
    select_best(runs)
}

/// Picks the lowest-validation-loss run out of per-restart results.
pub fn select_best(runs: Vec<Result<(MlpModel, LossHistory)>>) -> Result<RestartOutcome> {
    let restarts = runs.len();
    let mut losses = Vec::with_capacity(restarts);
    let mut best: Option<(usize, MlpModel, LossHistory)> = None;
    let mut first_error = None;
    for (i, run) in runs.into_iter().enumerate() {
        match run {
            Ok((model, history)) => {
                let v = history.best_val_loss();
                losses.push(Some(v));
                if best.as_ref().is_none_or(|(_, _, h)| v < h.best_val_loss()) {
                    best = Some((i, model, history));
                }
            }
            Err(e @ Error::Divergence { .. }) => {
                losses.push(None);
                first_error.get_or_insert(e);
            }
            Err(e) => return Err(e),
        }
    }
    match best {
        Some((restart_index, model, history)) => Ok(RestartOutcome {
            model,
            history,
            restart_index,
            restart_val_losses: losses,
        }),
        None => Err(Error::AllRestartsDiverged { restarts }),
    }
}
