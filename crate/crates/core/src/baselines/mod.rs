//! Coordinate-as-feature comparison models: a fully connected network and
//! a single-channel 1-D convolutional network. Neither sees the graph;
//! latitude and longitude are appended to the node features as two extra
//! columns and every sample is classified on its own.

mod cnn;
mod dense;
mod mlp;

pub use cnn::{cnn_gradients, cnn_train, CnnConfig, CnnModel, Conv1d};
pub use dense::DenseLayer;
pub use mlp::{mlp_gradients, mlp_train, MlpConfig, MlpModel};

use crate::error::{arg_err, Result};
use crate::geograph::GeoPoint;
use crate::optim::{Optimizer, OptimizerState};
use crate::split::Splits;
use crate::tensor::Matrix;
use crate::training::{check_labels, evaluate_epoch, softmax_ce_delta, Checkpoint, TrainTrace};

/// Appends `lat` and `lon` as the last two columns.
pub fn coords_as_features(features: &Matrix, coords: &[GeoPoint]) -> Result<Matrix> {
    let extra = coords.iter().flat_map(|p| [p.lat, p.lon]).collect();
    features.hstack(&Matrix::from_vec(coords.len(), 2, extra)?)
}

/// A per-sample classifier producing one probability row per input row.
pub trait Classifier {
    fn predict_proba(&self, samples: &Matrix) -> Result<Matrix>;

    /// Argmax labels, lowest class index on ties, plus the probabilities.
    fn predict(&self, samples: &Matrix) -> Result<(Vec<usize>, Matrix)> {
        let p = self.predict_proba(samples)?;
        Ok((p.argmax_rows(), p))
    }
}

pub fn baseline_predict<M: Classifier>(model: &M, samples: &Matrix) -> Result<(Vec<usize>, Matrix)> {
    model.predict(samples)
}

/// What the shared full-batch loop needs from a model.
pub(crate) trait FullBatch: Clone {
    type Cache;

    fn classes(&self) -> usize;
    fn forward_cached(&self, x: &Matrix) -> Result<(Matrix, Self::Cache)>;
    /// Gradients in the same order as `params_mut`.
    fn gradients(&self, x: &Matrix, cache: &Self::Cache, delta: Matrix) -> Result<Vec<Vec<f64>>>;
    fn params_mut(&mut self) -> Vec<&mut [f64]>;
}

pub(crate) fn fit<M: FullBatch>(
    model: M,
    x: &Matrix,
    labels: &[usize],
    splits: &Splits,
    learning_rate: f64,
    optimizer: Optimizer,
    epochs: usize,
) -> Result<(M, TrainTrace)> {
    check_labels(labels, x.rows(), model.classes())?;
    splits.validate(x.rows(), false)?;
    if splits.train.is_empty() {
        return arg_err("training split is empty");
    }
    let mut current = model;
    let sizes: Vec<usize> = current.params_mut().iter().map(|p| p.len()).collect();
    let mut opt = OptimizerState::new(optimizer, learning_rate, &sizes);
    let mut trace = TrainTrace::default();
    let mut best = Checkpoint::new();
    for epoch in 0..epochs {
        let (probs, cache) = current.forward_cached(x)?;
        let eval = evaluate_epoch(&probs, labels, splits, epoch)?;
        trace.loss.push(eval.loss);
        trace.train_accuracy.push(eval.train_acc);
        trace.val_accuracy.push(eval.val_acc);
        best.offer(epoch, eval.select_acc, eval.select_loss, &current);

        let delta = softmax_ce_delta(&probs, labels, &splits.train);
        let grads = current.gradients(x, &cache, delta)?;
        let grad_refs: Vec<&[f64]> = grads.iter().map(|g| g.as_slice()).collect();
        opt.apply(&mut current.params_mut(), &grad_refs);
    }
    let fallback = current.clone();
    let (chosen, best_epoch) = best.finish(fallback);
    trace.best_epoch = best_epoch;
    Ok((chosen, trace))
}

pub(crate) fn delta_for(probs: &Matrix, labels: &[usize], mask: &[usize]) -> Result<Matrix> {
    if mask.is_empty() {
        return arg_err("gradient over an empty sample set");
    }
    Ok(softmax_ce_delta(probs, labels, mask))
}
