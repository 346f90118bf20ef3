//! Graph-convolutional node classifier over a geographically weighted graph.
//!
//! Each layer computes `Z = N · H · W` with `N = D^-1/2 (A + I) D^-1/2`.
//! Hidden layers apply ReLU, the last layer applies a row softmax. Training
//! is full-batch and transductive: every node is propagated, only the
//! training nodes contribute to the loss.

use serde::{Deserialize, Serialize};

use crate::error::{arg_err, shape_err, Error, Result};
use crate::geograph::WeightedGraph;
use crate::optim::{Optimizer, OptimizerState};
use crate::split::Splits;
use crate::tensor::{matmul, matmul_nt, matmul_tn, relu, relu_grad, softmax_rows, Matrix, Rng};
use crate::training::{
    check_labels, evaluate_epoch, softmax_ce_delta, Checkpoint, TrainTrace,
};

pub use crate::training::cross_entropy as loss;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GcnConfig {
    /// `[F, hidden.., C]`.
    pub layer_dims: Vec<usize>,
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub seed: u64,
    pub weight_init_scale: f64,
    #[serde(default)]
    pub optimizer: Optimizer,
}

impl Default for GcnConfig {
    fn default() -> Self {
        Self {
            layer_dims: vec![6, 16, 4],
            learning_rate: 0.01,
            max_epochs: 2000,
            seed: 42,
            weight_init_scale: 1.0,
            optimizer: Optimizer::GradientDescent,
        }
    }
}

impl GcnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.layer_dims.len() < 2 {
            return arg_err("layer_dims needs at least an input and an output size");
        }
        if self.layer_dims.contains(&0) {
            return arg_err(format!("layer sizes must be positive: {:?}", self.layer_dims));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return arg_err(format!("learning rate must be >= 0, got {}", self.learning_rate));
        }
        if !(self.weight_init_scale >= 0.0 && self.weight_init_scale.is_finite()) {
            return arg_err("weight_init_scale must be >= 0");
        }
        Ok(())
    }

    pub fn classes(&self) -> usize {
        *self.layer_dims.last().unwrap_or(&0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GcnModel {
    pub weights: Vec<Matrix>,
    pub config: GcnConfig,
}

impl GcnModel {
    /// Checks that weight shapes chain through `config.layer_dims`.
    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        let dims = &self.config.layer_dims;
        if self.weights.len() != dims.len() - 1 {
            return shape_err(format!(
                "{} weight matrices for {} layers",
                self.weights.len(),
                dims.len() - 1
            ));
        }
        for (l, w) in self.weights.iter().enumerate() {
            if w.shape() != (dims[l], dims[l + 1]) {
                return shape_err(format!(
                    "layer {l} weight is {:?}, expected {}x{}",
                    w.shape(),
                    dims[l],
                    dims[l + 1]
                ));
            }
            if !w.is_finite() {
                return Err(Error::Validation(format!("layer {l} has non-finite weights")));
            }
        }
        Ok(())
    }
}

/// Glorot-uniform weights on `[-s, s]`, `s = scale * sqrt(6 / (fan_in + fan_out))`.
pub(crate) fn glorot(rng: &mut Rng, fan_in: usize, fan_out: usize, scale: f64) -> Matrix {
    let s = scale * (6.0 / (fan_in + fan_out) as f64).sqrt();
    let data = (0..fan_in * fan_out)
        .map(|_| if s > 0.0 { rng.uniform(-s, s) } else { 0.0 })
        .collect();
    Matrix::from_vec(fan_in, fan_out, data).expect("sized by construction")
}

pub fn init_model(config: &GcnConfig, rng: &mut Rng) -> Result<GcnModel> {
    config.validate()?;
    let weights = config
        .layer_dims
        .windows(2)
        .map(|d| glorot(rng, d[0], d[1], config.weight_init_scale))
        .collect();
    Ok(GcnModel {
        weights,
        config: config.clone(),
    })
}

/// Output of a forward pass, kept for backpropagation.
#[derive(Clone, Debug)]
pub struct ForwardPass {
    pub probabilities: Matrix,
    /// `H(0) = X, H(1), .., H(L-1)`: the inputs of every layer.
    pub hidden: Vec<Matrix>,
    /// Pre-activation `N · H(l) · W(l)` of every layer.
    pub pre_activations: Vec<Matrix>,
}

/// Multiplies `norm · h · w` in whichever order costs fewer operations.
fn propagate(norm: &Matrix, h: &Matrix, w: &Matrix) -> Result<Matrix> {
    if w.rows() <= w.cols() {
        matmul(&matmul(norm, h)?, w)
    } else {
        matmul(norm, &matmul(h, w)?)
    }
}

fn check_inputs(model: &GcnModel, graph: &WeightedGraph, features: &Matrix) -> Result<()> {
    let f = model.config.layer_dims[0];
    if features.cols() != f {
        return shape_err(format!(
            "features have {} columns, model expects {f}",
            features.cols()
        ));
    }
    if graph.n != features.rows() || graph.norm.shape() != (graph.n, graph.n) {
        return shape_err(format!(
            "graph has {} nodes, features have {} rows",
            graph.n,
            features.rows()
        ));
    }
    Ok(())
}

/// `propagated_input`, when given, must equal `norm · features`.
fn forward_inner(
    model: &GcnModel,
    norm: &Matrix,
    features: &Matrix,
    propagated_input: Option<&Matrix>,
) -> Result<ForwardPass> {
    let layers = model.weights.len();
    let mut hidden = vec![features.clone()];
    let mut pre_activations = Vec::with_capacity(layers);
    for (l, w) in model.weights.iter().enumerate() {
        let z = match (l, propagated_input) {
            (0, Some(nx)) => matmul(nx, w)?,
            _ => propagate(norm, &hidden[l], w)?,
        };
        if l + 1 < layers {
            hidden.push(relu(&z));
        }
        pre_activations.push(z);
    }
    let probabilities = softmax_rows(pre_activations.last().expect("at least one layer"));
    Ok(ForwardPass {
        probabilities,
        hidden,
        pre_activations,
    })
}

pub fn forward(model: &GcnModel, graph: &WeightedGraph, features: &Matrix) -> Result<ForwardPass> {
    check_inputs(model, graph, features)?;
    forward_inner(model, &graph.norm, features, None)
}

fn backward_inner(
    model: &GcnModel,
    norm: &Matrix,
    pass: &ForwardPass,
    labels: &[usize],
    mask: &[usize],
    propagated_input: Option<&Matrix>,
) -> Result<Vec<Matrix>> {
    let layers = model.weights.len();
    let mut grads = vec![Matrix::zeros(0, 0); layers];
    let mut delta = softmax_ce_delta(&pass.probabilities, labels, mask);
    for l in (0..layers).rev() {
        if l == 0 {
            if let Some(nx) = propagated_input {
                grads[0] = matmul_tn(nx, &delta)?;
                break;
            }
        }
        // dL/dW(l) = (N H(l))ᵀ Δ = H(l)ᵀ (Nᵀ Δ)
        let back = matmul_tn(norm, &delta)?;
        grads[l] = matmul_tn(&pass.hidden[l], &back)?;
        if l > 0 {
            let upstream = matmul_nt(&back, &model.weights[l])?;
            delta = upstream.hadamard(&relu_grad(&pass.pre_activations[l - 1]))?;
        }
    }
    Ok(grads)
}

/// Analytic gradient of the masked cross-entropy with respect to every
/// weight matrix.
pub fn backward(
    model: &GcnModel,
    graph: &WeightedGraph,
    features: &Matrix,
    labels: &[usize],
    mask: &[usize],
) -> Result<Vec<Matrix>> {
    check_inputs(model, graph, features)?;
    check_labels(labels, features.rows(), model.config.classes())?;
    if mask.is_empty() {
        return arg_err("gradient over an empty node set");
    }
    let pass = forward_inner(model, &graph.norm, features, None)?;
    backward_inner(model, &graph.norm, &pass, labels, mask, None)
}

/// Full-batch training for `config.max_epochs` epochs, returning the
/// weights from the epoch with the best validation accuracy.
pub fn train(
    model: &GcnModel,
    graph: &WeightedGraph,
    features: &Matrix,
    labels: &[usize],
    splits: &Splits,
) -> Result<(GcnModel, TrainTrace)> {
    model.validate()?;
    check_inputs(model, graph, features)?;
    check_labels(labels, features.rows(), model.config.classes())?;
    splits.validate(features.rows(), false)?;
    if splits.train.is_empty() {
        return arg_err("training split is empty");
    }

    let config = &model.config;
    let propagated = matmul(&graph.norm, features)?;
    let sizes: Vec<usize> = model.weights.iter().map(|w| w.data().len()).collect();
    let mut opt = OptimizerState::new(config.optimizer, config.learning_rate, &sizes);
    let mut current = model.clone();
    let mut trace = TrainTrace::default();
    let mut best = Checkpoint::new();

    for epoch in 0..config.max_epochs {
        let pass = forward_inner(&current, &graph.norm, features, Some(&propagated))?;
        let eval = evaluate_epoch(&pass.probabilities, labels, splits, epoch)?;
        trace.loss.push(eval.loss);
        trace.train_accuracy.push(eval.train_acc);
        trace.val_accuracy.push(eval.val_acc);
        best.offer(epoch, eval.select_acc, eval.select_loss, &current.weights);

        let grads = backward_inner(
            &current,
            &graph.norm,
            &pass,
            labels,
            &splits.train,
            Some(&propagated),
        )?;
        let mut params: Vec<&mut [f64]> =
            current.weights.iter_mut().map(|w| w.data_mut()).collect();
        let grad_refs: Vec<&[f64]> = grads.iter().map(|g| g.data()).collect();
        opt.apply(&mut params, &grad_refs);
    }

    let (weights, best_epoch) = best.finish(current.weights);
    trace.best_epoch = best_epoch;
    Ok((
        GcnModel {
            weights,
            config: config.clone(),
        },
        trace,
    ))
}

/// Per-node argmax class (lowest index on ties) and the probability rows.
pub fn predict(
    model: &GcnModel,
    graph: &WeightedGraph,
    features: &Matrix,
) -> Result<(Vec<usize>, Matrix)> {
    let pass = forward(model, graph, features)?;
    Ok((pass.probabilities.argmax_rows(), pass.probabilities))
}
