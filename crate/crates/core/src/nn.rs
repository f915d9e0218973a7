//! Feedforward networks trained by mini-batch gradient descent.
//!
//! A network is a sequence of weight layers. Each [`Layer`] keeps the
//! activations of its last forward pass, which [`Layer::backward`] reuses to
//! compute gradients. Gradients are accumulated as an exponential moving
//! average, `g <- lambda * g + (1 - lambda) * raw`, and [`Network::update`]
//! steps against that average.
//!
//! Activation derivatives are computed from a layer's *outputs*
//! (`o(1-o)` for the sigmoid, `1-o^2` for tanh).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::init::LayerInit;
use crate::matrix::{self, Matrix, Orientation};

/// Sigmoid inputs beyond this magnitude saturate to exactly 0 or 1.
pub const SIGMOID_CLIP: f64 = 13.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Activation {
    #[serde(rename = "SIGM", alias = "sigmoid", alias = "SIGMOID")]
    Sigmoid,
    #[serde(rename = "TANH", alias = "tanh")]
    Tanh,
    #[serde(rename = "LINEAR", alias = "linear")]
    Linear,
}

impl Activation {
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Sigmoid => sigmoid(z),
            Activation::Tanh => z.tanh(),
            Activation::Linear => z,
        }
    }

    /// Derivative expressed in terms of the activation's output.
    pub fn derivative_from_output(self, o: f64) -> f64 {
        match self {
            Activation::Sigmoid => o * (1.0 - o),
            Activation::Tanh => 1.0 - o * o,
            Activation::Linear => 1.0,
        }
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z > SIGMOID_CLIP {
        1.0
    } else if z < -SIGMOID_CLIP {
        0.0
    } else {
        1.0 / (1.0 + (-z).exp())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CostKind {
    /// Mean over samples of the summed half squared error.
    #[serde(rename = "MSE", alias = "mse")]
    Mse,
    /// Softmax with negative log likelihood.
    #[serde(rename = "NLL", alias = "nll")]
    Nll,
    /// Logistic cross entropy on logits.
    #[serde(rename = "CE", alias = "ce")]
    Ce,
    /// Classification error rate; evaluation only.
    #[serde(rename = "PER", alias = "per")]
    Per,
}

impl CostKind {
    /// NLL and CE expect raw logits, so the last layer stays linear.
    pub fn wants_linear_output(self) -> bool {
        matches!(self, CostKind::Nll | CostKind::Ce)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DecayKind {
    L0,
    L1,
    L2,
}

macro_rules! parse_via_serde {
    ($ty:ty, $what:literal) => {
        impl FromStr for $ty {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                let quoted = serde_json::Value::String(s.trim().to_string());
                serde_json::from_value(quoted.clone())
                    .or_else(|_| serde_json::from_value(serde_json::Value::String(s.trim().to_ascii_uppercase())))
                    .map_err(|_| Error::Config(format!(concat!("unknown ", $what, " {:?}"), s)))
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                match serde_json::to_value(self) {
                    Ok(serde_json::Value::String(s)) => f.write_str(&s),
                    _ => write!(f, "{:?}", self),
                }
            }
        }
    };
}

parse_via_serde!(Activation, "activation");
parse_via_serde!(CostKind, "cost type");
parse_via_serde!(DecayKind, "weight decay type");

/// Weight decay added to the weight gradient (never to the bias gradient).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightDecay {
    pub kind: DecayKind,
    pub value: f64,
}

impl WeightDecay {
    pub const NONE: WeightDecay = WeightDecay {
        kind: DecayKind::L0,
        value: 0.0,
    };

    fn term(&self, w: f64) -> f64 {
        match self.kind {
            DecayKind::L0 => 0.0,
            DecayKind::L1 => self.value * if w > 0.0 { 1.0 } else { -1.0 },
            DecayKind::L2 => self.value * w,
        }
    }
}

/// Full set of training options. Field names follow the configuration file;
/// omitted fields take their default values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, rename_all = "camelCase", deny_unknown_fields)]
pub struct TrainConfig {
    /// Training cases per batch.
    pub batchsize: usize,
    pub n_batches: usize,
    /// Validation cases (one batch).
    pub testsize: usize,
    /// Momentum coefficient when no schedule is used.
    pub lambda: f64,
    pub momentum_schedule: bool,
    pub max_lambda: f64,
    pub lr: f64,
    pub cost_type: CostKind,
    pub act_type: Activation,
    pub layer_sizes: Vec<usize>,
    /// Number of epochs.
    pub n_itrs: usize,
    pub wd_type: DecayKind,
    pub wd_value: f64,
    pub verbose: bool,
    /// Also return a copy of the network at its best validation error.
    pub keep_best: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batchsize: 10,
            n_batches: 90,
            testsize: 600,
            lambda: 0.99,
            momentum_schedule: false,
            max_lambda: 0.999,
            lr: 0.05,
            cost_type: CostKind::Nll,
            act_type: Activation::Tanh,
            layer_sizes: vec![100, 80, 80, 200, 10],
            n_itrs: 100,
            wd_type: DecayKind::L2,
            wd_value: 1e-5,
            verbose: false,
            keep_best: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.batchsize == 0 || self.n_batches == 0 || self.testsize == 0 {
            return bad("batchsize, nBatches and testsize must be at least 1".into());
        }
        if self.layer_sizes.len() < 2 || self.layer_sizes.contains(&0) {
            return bad(format!("layerSizes must hold at least two positive sizes, got {:?}", self.layer_sizes));
        }
        if !(0.0..1.0).contains(&self.lambda) {
            return bad(format!("lambda must lie in [0, 1), got {}", self.lambda));
        }
        if !(0.0..1.0).contains(&self.max_lambda) {
            return bad(format!("maxLambda must lie in [0, 1), got {}", self.max_lambda));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("lr must be positive, got {}", self.lr));
        }
        if !(self.wd_value >= 0.0 && self.wd_value.is_finite()) {
            return bad(format!("wdValue must be non-negative, got {}", self.wd_value));
        }
        if self.cost_type == CostKind::Per {
            return bad("PER is an evaluation metric and cannot be trained on".into());
        }
        Ok(())
    }

    pub fn weight_decay(&self) -> WeightDecay {
        WeightDecay {
            kind: self.wd_type,
            value: self.wd_value,
        }
    }

    /// Momentum used for the update numbered `t` (zero-based).
    pub fn effective_lambda(&self, t: u64) -> f64 {
        if self.momentum_schedule {
            momentum_schedule(t, self.max_lambda)
        } else {
            self.lambda
        }
    }
}

/// `min(1 - 2^(-1 - log2(floor(t/250) + 1)), max_lambda)`, evaluated as
/// `1 - 1 / (2 (floor(t/250) + 1))`.
pub fn momentum_schedule(t: u64, max_lambda: f64) -> f64 {
    let k = (t / 250 + 1) as f64;
    (1.0 - 0.5 / k).min(max_lambda)
}

/// Counts parameter updates (one per processed batch).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct UpdateClock {
    pub t: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    weights: Matrix,
    biases: Vec<f64>,
    grad_weights: Matrix,
    grad_biases: Vec<f64>,
    input: Option<Matrix>,
    output: Option<Matrix>,
    activation: Activation,
}

impl Layer {
    pub fn new(init: LayerInit, activation: Activation) -> Result<Self> {
        let weights = match init.weights.orientation() {
            Orientation::Col => init.weights,
            Orientation::Row => init.weights.change_orientation(),
        };
        if init.biases.len() != weights.cols() {
            return Err(Error::dim(format!(
                "{} biases for {} output units",
                init.biases.len(),
                weights.cols()
            )));
        }
        Ok(Layer {
            grad_weights: Matrix::zeros(weights.rows(), weights.cols(), Orientation::Col)?,
            grad_biases: vec![0.0; weights.cols()],
            weights,
            biases: init.biases,
            input: None,
            output: None,
            activation,
        })
    }

    pub fn n_in(&self) -> usize {
        self.weights.rows()
    }

    pub fn n_out(&self) -> usize {
        self.weights.cols()
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    pub fn grad_weights(&self) -> &Matrix {
        &self.grad_weights
    }

    pub fn grad_biases(&self) -> &[f64] {
        &self.grad_biases
    }

    pub fn cached_input(&self) -> Option<&Matrix> {
        self.input.as_ref()
    }

    pub fn cached_output(&self) -> Option<&Matrix> {
        self.output.as_ref()
    }

    pub fn set_weights(&mut self, weights: Matrix) -> Result<()> {
        if weights.shape() != self.weights.shape() {
            return Err(Error::dim(format!(
                "replacement weights are {}x{}, layer is {}x{}",
                weights.rows(),
                weights.cols(),
                self.n_in(),
                self.n_out()
            )));
        }
        self.weights = match weights.orientation() {
            Orientation::Col => weights,
            Orientation::Row => weights.change_orientation(),
        };
        Ok(())
    }

    pub fn set_biases(&mut self, biases: Vec<f64>) -> Result<()> {
        if biases.len() != self.n_out() {
            return Err(Error::dim(format!("{} biases for {} units", biases.len(), self.n_out())));
        }
        self.biases = biases;
        Ok(())
    }

    /// Overwrites the momentum accumulators.
    pub fn set_gradients(&mut self, grad_weights: Matrix, grad_biases: Vec<f64>) -> Result<()> {
        if grad_weights.shape() != self.weights.shape() || grad_biases.len() != self.n_out() {
            return Err(Error::dim("gradient shapes must match the layer".to_string()));
        }
        self.grad_weights = match grad_weights.orientation() {
            Orientation::Col => grad_weights,
            Orientation::Row => grad_weights.change_orientation(),
        };
        self.grad_biases = grad_biases;
        Ok(())
    }

    fn activate(&self, input: &Matrix) -> Result<Matrix> {
        if input.orientation() != Orientation::Row {
            return Err(Error::Orientation {
                expected: "row-oriented input batch",
                actual: input.orientation(),
            });
        }
        if input.cols() != self.n_in() {
            return Err(Error::dim(format!(
                "input has {} features, layer expects {}",
                input.cols(),
                self.n_in()
            )));
        }
        let z = matrix::multiply(input, &self.weights, Orientation::Row)?;
        let z = matrix::broadcast_rowvector(&self.biases, &z, |b, x| x + b)?;
        Ok(match self.activation {
            Activation::Linear => z,
            act => z.map(|x| act.apply(x)),
        })
    }

    /// Forward pass over a `batch x n_in` row-oriented input, caching the
    /// input and output for [`Layer::backward`].
    pub fn forward(&mut self, input: Matrix) -> Result<Matrix> {
        let output = self.activate(&input)?;
        self.input = Some(input);
        self.output = Some(output.clone());
        Ok(output)
    }

    /// Backward pass: folds this batch's gradient (plus weight decay) into the
    /// momentum accumulators and returns the gradient w.r.t. the layer input.
    pub fn backward(&mut self, grad_in: &Matrix, lambda: f64, decay: WeightDecay) -> Result<Matrix> {
        let (input, output) = match (&self.input, &self.output) {
            (Some(i), Some(o)) => (i, o),
            _ => {
                return Err(Error::InvalidArgument(
                    "backward called before a forward pass".into(),
                ))
            }
        };
        let grad_in = match grad_in.orientation() {
            Orientation::Row => std::borrow::Cow::Borrowed(grad_in),
            Orientation::Col => std::borrow::Cow::Owned(grad_in.change_orientation()),
        };
        let act = self.activation;
        let delta = match act {
            Activation::Linear => grad_in.into_owned(),
            _ => matrix::merge(&grad_in, output, |g, o| g * act.derivative_from_output(o))?,
        };
        let delta_cols = delta.change_orientation();
        let input_t = input.change_orientation().transpose();
        let raw_w = matrix::multiply(&input_t, &delta_cols, Orientation::Col)?;
        let raw_b = delta_cols.sum_per_vector();

        let with_decay = match decay.kind {
            DecayKind::L0 => raw_w,
            _ => matrix::merge(&raw_w, &self.weights, |g, w| g + decay.term(w))?,
        };
        let ema = |old: f64, new: f64| lambda * old + (1.0 - lambda) * new;
        self.grad_weights = matrix::merge(&self.grad_weights, &with_decay, ema)?;
        for (g, r) in self.grad_biases.iter_mut().zip(raw_b) {
            *g = ema(*g, r);
        }

        let weights_t = self.weights.change_orientation().transpose();
        matrix::multiply(&delta, &weights_t, Orientation::Row)
    }

    /// `W <- W - lr * gradW`, `B <- B - lr * gradB`.
    pub fn update(&mut self, lr: f64) -> Result<()> {
        self.weights = matrix::merge(&self.weights, &self.grad_weights, |w, g| w - lr * g)?;
        for (b, g) in self.biases.iter_mut().zip(&self.grad_biases) {
            *b -= lr * g;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    layers: Vec<Layer>,
}

impl Network {
    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidArgument("a network needs at least one layer".into()));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].n_out() != pair[1].n_in() {
                return Err(Error::dim(format!(
                    "layer {i} has {} outputs but layer {} takes {} inputs",
                    pair[0].n_out(),
                    i + 1,
                    pair[1].n_in()
                )));
            }
        }
        Ok(Network { layers })
    }

    /// Hidden layers use `activation`; the last layer is linear when `cost`
    /// works on logits (NLL, CE) and uses `activation` otherwise.
    pub fn from_init(inits: Vec<LayerInit>, activation: Activation, cost: CostKind) -> Result<Self> {
        let last = inits.len().saturating_sub(1);
        let layers = inits
            .into_iter()
            .enumerate()
            .map(|(i, init)| {
                let act = if i == last && cost.wants_linear_output() {
                    Activation::Linear
                } else {
                    activation
                };
                Layer::new(init, act)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_layers(layers)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn n_inputs(&self) -> usize {
        self.layers[0].n_in()
    }

    pub fn n_outputs(&self) -> usize {
        self.layers[self.layers.len() - 1].n_out()
    }

    /// Forward pass through every layer, first to last, caching activations.
    pub fn forward(&mut self, input: Matrix) -> Result<Matrix> {
        let mut x = input;
        for (i, layer) in self.layers.iter_mut().enumerate() {
            x = layer
                .forward(x)
                .map_err(|e| Error::dim(format!("layer {i}: {e}")))?;
        }
        Ok(x)
    }

    /// Forward pass without touching the caches.
    pub fn predict(&self, input: &Matrix) -> Result<Matrix> {
        let mut x = self.layers[0].activate(input)?;
        for layer in &self.layers[1..] {
            x = layer.activate(&x)?;
        }
        Ok(x)
    }

    /// Backward pass from the last layer to the first, threading the
    /// propagated gradient. Returns the gradient w.r.t. the network input.
    pub fn backward(&mut self, cost_gradient: &Matrix, lambda: f64, decay: WeightDecay) -> Result<Matrix> {
        let mut grad = cost_gradient.clone();
        for layer in self.layers.iter_mut().rev() {
            grad = layer.backward(&grad, lambda, decay)?;
        }
        Ok(grad)
    }

    pub fn update(&mut self, lr: f64) -> Result<()> {
        self.layers.iter_mut().try_for_each(|l| l.update(lr))
    }

    pub fn evaluate(&self, input: &Matrix, target: &Matrix, kind: CostKind) -> Result<f64> {
        let output = self.predict(input)?;
        Ok(compute_cost(&output, target, kind)?.0)
    }
}

/// Row-wise softmax, stabilized by subtracting each row's maximum.
pub fn softmax_rows(logits: &Matrix) -> Result<Matrix> {
    let rows = match logits.orientation() {
        Orientation::Row => logits.clone(),
        Orientation::Col => logits.change_orientation(),
    };
    let shifted = matrix::broadcast_scalars(&rows.max_per_vector(), &rows, |m, x| (x - m).exp())?;
    matrix::broadcast_scalars(&shifted.sum_per_vector(), &shifted, |s, x| x / s)
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

fn one_hot_index(row: &[f64], line: usize) -> Result<usize> {
    let mut hot = None;
    for (k, &t) in row.iter().enumerate() {
        if t == 1.0 && hot.is_none() {
            hot = Some(k);
        } else if t != 0.0 {
            hot = None;
            break;
        }
    }
    hot.ok_or_else(|| Error::InvalidArgument(format!("target row {line} is not one-hot")))
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Cost of `output` against `target` and its gradient w.r.t. `output`.
///
/// Both are `batch x K`; the gradient is row-oriented. PER returns a 1x1 zero
/// matrix in place of a gradient.
pub fn compute_cost(output: &Matrix, target: &Matrix, kind: CostKind) -> Result<(f64, Matrix)> {
    if output.shape() != target.shape() {
        return Err(Error::dim(format!(
            "output is {}x{}, target is {}x{}",
            output.rows(),
            output.cols(),
            target.rows(),
            target.cols()
        )));
    }
    let as_rows = |m: &Matrix| match m.orientation() {
        Orientation::Row => m.clone(),
        Orientation::Col => m.change_orientation(),
    };
    let (o, t) = (as_rows(output), as_rows(target));
    let n = o.rows() as f64;
    match kind {
        CostKind::Mse => {
            let diff = matrix::merge(&o, &t, |a, b| a - b)?;
            let cost = diff
                .map(|d| 0.5 * d * d)
                .sum_per_vector()
                .iter()
                .sum::<f64>()
                / n;
            Ok((cost, diff.map(|d| d / n)))
        }
        CostKind::Nll => {
            let mut cost = 0.0;
            for (i, (row, trow)) in o.vectors().zip(t.vectors()).enumerate() {
                let k = one_hot_index(trow, i)?;
                let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let lse = row.iter().map(|&x| (x - max).exp()).sum::<f64>().ln();
                cost -= row[k] - max - lse;
            }
            let p = softmax_rows(&o)?;
            let grad = matrix::merge(&p, &t, |p, t| (p - t) / n)?;
            Ok((cost / n, grad))
        }
        CostKind::Ce => {
            let cost = matrix::merge(&o, &t, |x, y| softplus(x) - x * y)?
                .sum_per_vector()
                .iter()
                .sum::<f64>()
                / n;
            let grad = matrix::merge(&o, &t, |x, y| (logistic(x) - y) / n)?;
            Ok((cost, grad))
        }
        CostKind::Per => {
            let mut wrong = 0usize;
            for (i, (row, trow)) in o.vectors().zip(t.vectors()).enumerate() {
                if argmax(row) != one_hot_index(trow, i)? {
                    wrong += 1;
                }
            }
            Ok((wrong as f64 / n, Matrix::zeros(1, 1, Orientation::Row)?))
        }
    }
}

fn check_batches(inputs: &[Matrix], targets: &[Matrix]) -> Result<()> {
    if inputs.len() != targets.len() {
        return Err(Error::dim(format!(
            "{} input batches but {} target batches",
            inputs.len(),
            targets.len()
        )));
    }
    Ok(())
}

/// One gradient step on one batch. Returns the batch cost before the step.
pub fn train_batch(
    net: &mut Network,
    input: &Matrix,
    target: &Matrix,
    config: &TrainConfig,
    clock: &mut UpdateClock,
) -> Result<f64> {
    let output = net.forward(input.clone())?;
    let (cost, grad) = compute_cost(&output, target, config.cost_type)?;
    net.backward(&grad, config.effective_lambda(clock.t), config.weight_decay())?;
    net.update(config.lr)?;
    clock.t += 1;
    Ok(cost)
}

/// One pass over all batches in their fixed order. Returns the mean batch
/// cost. `epoch` (one-based) is only used for diagnostics.
pub fn train_epoch(
    net: &mut Network,
    inputs: &[Matrix],
    targets: &[Matrix],
    config: &TrainConfig,
    clock: &mut UpdateClock,
    epoch: usize,
) -> Result<f64> {
    check_batches(inputs, targets)?;
    let mut total = 0.0;
    for (b, (x, y)) in inputs.iter().zip(targets).enumerate() {
        let cost = train_batch(net, x, y, config, clock)?;
        if !cost.is_finite() {
            return Err(Error::NonFiniteCost {
                epoch,
                batch: b + 1,
                cost,
            });
        }
        if config.verbose {
            println!("{epoch},{},{cost}", b + 1);
        }
        total += cost;
    }
    Ok(total / inputs.len().max(1) as f64)
}

/// Trains for `config.n_itrs` epochs. Returns the mean training cost of each
/// epoch.
pub fn train_epochs(
    net: &mut Network,
    inputs: &[Matrix],
    targets: &[Matrix],
    config: &TrainConfig,
    clock: &mut UpdateClock,
) -> Result<Vec<f64>> {
    (1..=config.n_itrs)
        .map(|epoch| train_epoch(net, inputs, targets, config, clock, epoch))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_cost: f64,
    pub val_error: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub best_val_error: f64,
    pub history: Vec<EpochRecord>,
    /// Snapshot at the best validation error, when `keep_best` is set.
    pub best_network: Option<Network>,
}

/// Trains epoch by epoch, measuring the validation error rate after each one.
/// `net` ends up as the final network; the minimum validation error is
/// reported. With zero epochs the untrained network is evaluated once.
pub fn train_best(
    net: &mut Network,
    inputs: &[Matrix],
    targets: &[Matrix],
    val_input: &Matrix,
    val_target: &Matrix,
    config: &TrainConfig,
    clock: &mut UpdateClock,
) -> Result<TrainOutcome> {
    check_batches(inputs, targets)?;
    if config.n_itrs == 0 {
        let err = net.evaluate(val_input, val_target, CostKind::Per)?;
        return Ok(TrainOutcome {
            best_val_error: err,
            history: Vec::new(),
            best_network: config.keep_best.then(|| net.clone()),
        });
    }
    let mut best = f64::INFINITY;
    let mut best_network = None;
    let mut history = Vec::with_capacity(config.n_itrs);
    for epoch in 1..=config.n_itrs {
        let train_cost = train_epoch(net, inputs, targets, config, clock, epoch)?;
        let val_error = net.evaluate(val_input, val_target, CostKind::Per)?;
        if val_error < best {
            best = val_error;
            if config.keep_best {
                best_network = Some(net.clone());
            }
        }
        if config.verbose {
            println!("epoch {epoch}: best validation error {best}");
        }
        history.push(EpochRecord {
            epoch,
            train_cost,
            val_error,
        });
    }
    Ok(TrainOutcome {
        best_val_error: best,
        history,
        best_network,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::init::{init_network, InitScheme};
    use crate::rng::RngState;
    use Orientation::{Col, Row};

    fn rows(values: &[f64], r: usize, c: usize) -> Matrix {
        Matrix::from_row_major(values, r, c, Row).unwrap()
    }

    fn layer(w: &[f64], n_in: usize, n_out: usize, b: Vec<f64>, act: Activation) -> Layer {
        Layer::new(
            LayerInit {
                weights: Matrix::from_row_major(w, n_in, n_out, Col).unwrap(),
                biases: b,
            },
            act,
        )
        .unwrap()
    }

    #[test]
    fn activation_values() {
        assert_eq!(Activation::Sigmoid.apply(0.0), 0.5);
        assert_eq!(Activation::Sigmoid.apply(14.0), 1.0);
        assert_eq!(Activation::Sigmoid.apply(-14.0), 0.0);
        assert_eq!(Activation::Tanh.apply(0.0), 0.0);
        assert_eq!(Activation::Linear.apply(-3.5), -3.5);
    }

    #[test]
    fn forward_zero_network() {
        let mut l = layer(&[0.0; 6], 3, 2, vec![0.0; 2], Activation::Tanh);
        let out = l.forward(rows(&[1., 2., 3., 4., 5., 6.], 2, 3)).unwrap();
        assert!(out.as_slice().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn forward_hand_dot_product() {
        let mut l = layer(&[0.5, -0.25], 2, 1, vec![0.0], Activation::Linear);
        let out = l.forward(rows(&[1., 2.], 1, 2)).unwrap();
        assert_eq!(out.get(0, 0), 0.0);
        assert!(l.cached_input().is_some() && l.cached_output().is_some());
    }

    #[test]
    fn forward_rows_independent() {
        let mut l = layer(&[0.1, 0.2, -0.3, 0.4, 0.5, -0.6], 3, 2, vec![0.1, -0.1], Activation::Sigmoid);
        let out = l.forward(rows(&[1., 2., 3., 1., 2., 3., 1., 2., 3.], 3, 3)).unwrap();
        assert_eq!(out.vector(0), out.vector(1));
        assert_eq!(out.vector(1), out.vector(2));
    }

    #[test]
    fn forward_dimension_mismatch() {
        let mut l = layer(&[0.0; 6], 3, 2, vec![0.0; 2], Activation::Tanh);
        assert!(matches!(l.forward(rows(&[1., 2.], 1, 2)), Err(Error::Dimension(_))));
    }

    #[test]
    fn two_layer_hand_forward() {
        // 2-2-1, tanh hidden, linear output
        let l1 = layer(&[0.3, -0.2, 0.5, 0.7], 2, 2, vec![0.1, -0.1], Activation::Tanh);
        let l2 = layer(&[1.5, -2.0], 2, 1, vec![0.25], Activation::Linear);
        let mut net = Network::from_layers(vec![l1, l2]).unwrap();
        let out = net.forward(rows(&[1.0, -1.0], 1, 2)).unwrap();
        let h1 = (1.0f64 * 0.3 + -1.0 * 0.5 + 0.1).tanh();
        let h2 = (1.0f64 * -0.2 + -1.0 * 0.7 - 0.1).tanh();
        let expected = 1.5 * h1 - 2.0 * h2 + 0.25;
        assert!((out.get(0, 0) - expected).abs() < 1e-12);
        assert_eq!(net.predict(&rows(&[1.0, -1.0], 1, 2)).unwrap(), out);
    }

    #[test]
    fn output_layer_rule() {
        let mut rng = RngState::new(1, 1);
        let inits = init_network(&mut rng, &[4, 3, 3, 2], InitScheme::Normalized, &[]).unwrap();
        let nll = Network::from_init(inits.clone(), Activation::Tanh, CostKind::Nll).unwrap();
        let acts: Vec<_> = nll.layers().iter().map(Layer::activation).collect();
        assert_eq!(acts, vec![Activation::Tanh, Activation::Tanh, Activation::Linear]);
        let mse = Network::from_init(inits, Activation::Sigmoid, CostKind::Mse).unwrap();
        assert!(mse.layers().iter().all(|l| l.activation() == Activation::Sigmoid));
    }

    #[test]
    fn zero_weight_nll_net_outputs_zero() {
        let inits = vec![
            LayerInit {
                weights: Matrix::zeros(3, 4, Col).unwrap(),
                biases: vec![0.0; 4],
            },
            LayerInit {
                weights: Matrix::zeros(4, 2, Col).unwrap(),
                biases: vec![0.0; 2],
            },
        ];
        let mut net = Network::from_init(inits, Activation::Tanh, CostKind::Nll).unwrap();
        let out = net.forward(rows(&[1., 2., 3.], 1, 3)).unwrap();
        assert!(out.as_slice().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn mse_at_target() {
        let o = rows(&[0.2, 0.8, 0.5, 0.1], 2, 2);
        let (c, g) = compute_cost(&o, &o, CostKind::Mse).unwrap();
        assert_eq!(c, 0.0);
        assert!(g.as_slice().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn mse_by_hand() {
        let o = rows(&[1.0, 2.0, 0.0, 0.0], 2, 2);
        let t = rows(&[0.0, 0.0, 0.0, 1.0], 2, 2);
        let (c, g) = compute_cost(&o, &t, CostKind::Mse).unwrap();
        // sample costs 0.5*(1+4)=2.5 and 0.5*1=0.5, mean 1.5
        assert_eq!(c, 1.5);
        assert_eq!(g.as_slice(), &[0.5, 1.0, 0.0, -0.5]);
    }

    #[test]
    fn nll_uniform_logits() {
        let o = Matrix::filled(0.3, 3, 10, Row).unwrap();
        let mut t = vec![0.0; 30];
        t[2] = 1.0;
        t[15] = 1.0;
        t[29] = 1.0;
        let (c, g) = compute_cost(&o, &rows(&t, 3, 10), CostKind::Nll).unwrap();
        assert!((c - 10f64.ln()).abs() < 1e-12);
        for s in g.sum_per_vector() {
            assert!(s.abs() < 1e-12);
        }
    }

    #[test]
    fn nll_requires_one_hot() {
        let o = Matrix::zeros(1, 3, Row).unwrap();
        let t = rows(&[0.5, 0.5, 0.0], 1, 3);
        assert!(matches!(compute_cost(&o, &t, CostKind::Nll), Err(Error::InvalidArgument(_))));
        assert!(matches!(compute_cost(&o, &t, CostKind::Per), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn ce_by_hand() {
        let o = rows(&[0.0, 2.0], 1, 2);
        let t = rows(&[1.0, 0.0], 1, 2);
        let (c, g) = compute_cost(&o, &t, CostKind::Ce).unwrap();
        let expected = 2f64.ln() + (1.0 + 2f64.exp()).ln() - 0.0;
        assert!((c - expected).abs() < 1e-12);
        assert!((g.get(0, 0) - (0.5 - 1.0)).abs() < 1e-15);
        assert!((g.get(0, 1) - 1.0 / (1.0 + (-2f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn per_extremes() {
        let t = rows(&[1., 0., 0., 0., 0., 1.], 2, 3);
        let right = rows(&[0.9, 0.1, 0.0, 0.0, 0.2, 0.7], 2, 3);
        let wrong = rows(&[0.0, 0.9, 0.0, 0.8, 0.2, 0.1], 2, 3);
        let (c, g) = compute_cost(&right, &t, CostKind::Per).unwrap();
        assert_eq!(c, 0.0);
        assert_eq!(g.shape(), (1, 1));
        assert_eq!(compute_cost(&wrong, &t, CostKind::Per).unwrap().0, 1.0);
        assert_eq!(
            compute_cost(&right, &Matrix::zeros(2, 2, Row).unwrap(), CostKind::Per).err().map(|e| matches!(e, Error::Dimension(_))),
            Some(true)
        );
    }

    #[test]
    fn softmax_properties() {
        let x = rows(&[1.0, 2.0, 3.0, -1000.0, 0.0, 1000.0], 2, 3);
        let p = softmax_rows(&x).unwrap();
        for s in p.sum_per_vector() {
            assert!((s - 1.0).abs() < 1e-12);
        }
        let shifted = softmax_rows(&x.map(|v| v + 37.0)).unwrap();
        for (a, b) in p.as_slice().iter().zip(shifted.as_slice()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn backward_outer_product_by_hand() {
        let mut l = layer(&[0.0, 0.0], 2, 1, vec![0.0], Activation::Linear);
        l.forward(rows(&[1.0, 2.0], 1, 2)).unwrap();
        let grad_out = l.backward(&rows(&[3.0], 1, 1), 0.0, WeightDecay::NONE).unwrap();
        assert_eq!(l.grad_weights().as_slice(), &[3.0, 6.0]);
        assert_eq!(l.grad_biases(), &[3.0]);
        assert_eq!(grad_out.as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn backward_momentum_extremes() {
        let mut l = layer(&[0.5, -1.0], 2, 1, vec![0.0], Activation::Linear);
        l.set_gradients(Matrix::filled(7.0, 2, 1, Col).unwrap(), vec![7.0]).unwrap();
        l.forward(rows(&[1.0, 2.0], 1, 2)).unwrap();
        l.backward(&rows(&[3.0], 1, 1), 1.0, WeightDecay::NONE).unwrap();
        assert_eq!(l.grad_weights().as_slice(), &[7.0, 7.0]);
        assert_eq!(l.grad_biases(), &[7.0]);

        let l2 = WeightDecay {
            kind: DecayKind::L2,
            value: 0.1,
        };
        l.backward(&rows(&[3.0], 1, 1), 0.0, l2).unwrap();
        assert_eq!(l.grad_weights().as_slice(), &[3.0 + 0.05, 6.0 - 0.1]);
        assert_eq!(l.grad_biases(), &[3.0]);
    }

    #[test]
    fn l1_sign_of_zero_is_negative() {
        let mut l = layer(&[0.0, 2.0], 2, 1, vec![0.0], Activation::Linear);
        l.forward(rows(&[0.0, 0.0], 1, 2)).unwrap();
        let l1 = WeightDecay {
            kind: DecayKind::L1,
            value: 0.5,
        };
        l.backward(&rows(&[0.0], 1, 1), 0.0, l1).unwrap();
        assert_eq!(l.grad_weights().as_slice(), &[-0.5, 0.5]);
    }

    #[test]
    fn zero_cost_gradient_decays_accumulators() {
        let mut l = layer(&[0.5, -1.0], 2, 1, vec![0.0], Activation::Tanh);
        l.set_gradients(Matrix::filled(2.0, 2, 1, Col).unwrap(), vec![4.0]).unwrap();
        l.forward(rows(&[1.0, 2.0], 1, 2)).unwrap();
        l.backward(&rows(&[0.0], 1, 1), 0.25, WeightDecay::NONE).unwrap();
        assert_eq!(l.grad_weights().as_slice(), &[0.5, 0.5]);
        assert_eq!(l.grad_biases(), &[1.0]);
    }

    #[test]
    fn backward_before_forward_is_an_error() {
        let mut l = layer(&[0.5, -1.0], 2, 1, vec![0.0], Activation::Linear);
        assert!(l.backward(&rows(&[1.0], 1, 1), 0.0, WeightDecay::NONE).is_err());
    }

    #[test]
    fn schedule_points() {
        assert_eq!(momentum_schedule(0, 0.999), 0.5);
        assert_eq!(momentum_schedule(249, 0.999), 0.5);
        assert_eq!(momentum_schedule(250, 0.999), 0.75);
        assert_eq!(momentum_schedule(1_000_000_000, 0.9), 0.9);
    }

    #[test]
    fn schedule_matches_log_form() {
        for t in (0..200_000u64).step_by(97) {
            let k = (t / 250 + 1) as f64;
            let literal = (1.0 - 2f64.powf(-1.0 - k.log2())).min(0.999);
            assert!((momentum_schedule(t, 0.999) - literal).abs() < 1e-15, "t={t}");
        }
    }

    #[test]
    fn update_examples() {
        let mut l = layer(&[1.0], 1, 1, vec![0.0], Activation::Linear);
        l.set_gradients(Matrix::filled(0.5, 1, 1, Col).unwrap(), vec![0.0]).unwrap();
        let before = l.clone();
        l.update(0.0).unwrap();
        assert_eq!(l, before);
        l.update(0.1).unwrap();
        assert_eq!(l.weights().get(0, 0), 0.95);
        assert_eq!(l.grad_weights().get(0, 0), 0.5);
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let mut c = TrainConfig::default();
        c.lambda = 1.0;
        assert!(c.validate().is_err());
        c = TrainConfig::default();
        c.lr = 0.0;
        assert!(c.validate().is_err());
        c = TrainConfig::default();
        c.layer_sizes = vec![3];
        assert!(c.validate().is_err());
        c = TrainConfig::default();
        c.cost_type = CostKind::Per;
        assert!(c.validate().is_err());
    }

    #[test]
    fn enum_names_round_trip() {
        assert_eq!("NLL".parse::<CostKind>().unwrap(), CostKind::Nll);
        assert_eq!("mse".parse::<CostKind>().unwrap(), CostKind::Mse);
        assert_eq!("tanh".parse::<Activation>().unwrap(), Activation::Tanh);
        assert_eq!("SIGM".parse::<Activation>().unwrap(), Activation::Sigmoid);
        assert_eq!("l2".parse::<DecayKind>().unwrap(), DecayKind::L2);
        assert_eq!(CostKind::Nll.to_string(), "NLL");
        assert!("relu".parse::<Activation>().is_err());
    }
}
