//! Pieces shared by every trainer: masked cross-entropy, masked accuracy,
//! the per-epoch trace and best-validation checkpointing.

use serde::{Deserialize, Serialize};

use crate::error::{arg_err, shape_err, Error, Result};
use crate::split::Splits;
use crate::tensor::Matrix;

/// Floor applied to probabilities before taking logarithms.
pub const LOG_FLOOR: f64 = 1e-15;

/// Mean negative log-probability of the true class over `mask`.
pub fn cross_entropy(probabilities: &Matrix, labels: &[usize], mask: &[usize]) -> Result<f64> {
    if mask.is_empty() {
        return arg_err("loss over an empty node set");
    }
    if labels.len() != probabilities.rows() {
        return shape_err(format!(
            "{} labels for {} probability rows",
            labels.len(),
            probabilities.rows()
        ));
    }
    let c = probabilities.cols();
    let mut total = 0.0;
    for &i in mask {
        let y = labels[i];
        if y >= c {
            return arg_err(format!("label {y} at node {i} outside 0..{c}"));
        }
        total -= probabilities.get(i, y).max(LOG_FLOOR).ln();
    }
    Ok(total / mask.len() as f64)
}

/// Fraction of `mask` whose predicted label is correct; 0 for an empty mask.
pub fn masked_accuracy(predicted: &[usize], labels: &[usize], mask: &[usize]) -> f64 {
    if mask.is_empty() {
        return 0.0;
    }
    let hits = mask.iter().filter(|&&i| predicted[i] == labels[i]).count();
    hits as f64 / mask.len() as f64
}

/// `(P - Y) / |mask|` on masked rows, zero elsewhere: the gradient of the
/// masked cross-entropy with respect to the softmax logits.
pub(crate) fn softmax_ce_delta(probabilities: &Matrix, labels: &[usize], mask: &[usize]) -> Matrix {
    let mut delta = Matrix::zeros(probabilities.rows(), probabilities.cols());
    let scale = 1.0 / mask.len() as f64;
    for &i in mask {
        let row = delta.row_mut(i);
        row.copy_from_slice(probabilities.row(i));
        row[labels[i]] -= 1.0;
        for v in row.iter_mut() {
            *v *= scale;
        }
    }
    delta
}

/// Per-epoch training record.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    pub loss: Vec<f64>,
    pub train_accuracy: Vec<f64>,
    pub val_accuracy: Vec<f64>,
    /// Epoch whose weights were returned.
    pub best_epoch: usize,
}

impl TrainTrace {
    pub fn epochs(&self) -> usize {
        self.loss.len()
    }

    /// CSV with header `epoch,loss,train_accuracy,val_accuracy`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,loss,train_accuracy,val_accuracy\n");
        for e in 0..self.loss.len() {
            out.push_str(&format!(
                "{},{:.17e},{:.17e},{:.17e}\n",
                e, self.loss[e], self.train_accuracy[e], self.val_accuracy[e]
            ));
        }
        out
    }
}

/// Keeps the parameters with the best validation accuracy seen so far,
/// breaking ties by lower validation loss. When there is no validation
/// set, training accuracy and loss stand in.
pub(crate) struct Checkpoint<P> {
    best: Option<(f64, f64, usize, P)>,
}

impl<P: Clone> Checkpoint<P> {
    pub(crate) fn new() -> Self {
        Self { best: None }
    }

    pub(crate) fn offer(&mut self, epoch: usize, accuracy: f64, loss: f64, params: &P) {
        let better = match &self.best {
            None => true,
            Some((a, l, _, _)) => accuracy > *a || (accuracy == *a && loss < *l),
        };
        if better {
            self.best = Some((accuracy, loss, epoch, params.clone()));
        }
    }

    pub(crate) fn finish(self, fallback: P) -> (P, usize) {
        match self.best {
            Some((_, _, e, p)) => (p, e),
            None => (fallback, 0),
        }
    }
}

/// Everything a full-batch trainer needs to know about one epoch's output.
pub(crate) struct EpochEval {
    pub loss: f64,
    pub train_acc: f64,
    pub val_acc: f64,
    pub select_acc: f64,
    pub select_loss: f64,
}

pub(crate) fn evaluate_epoch(
    probabilities: &Matrix,
    labels: &[usize],
    splits: &Splits,
    epoch: usize,
) -> Result<EpochEval> {
    let loss = cross_entropy(probabilities, labels, &splits.train)?;
    if !loss.is_finite() || !probabilities.is_finite() {
        return Err(Error::Numerical(format!(
            "non-finite training loss at epoch {epoch}; lower the learning rate"
        )));
    }
    let predicted = probabilities.argmax_rows();
    let train_acc = masked_accuracy(&predicted, labels, &splits.train);
    let val_acc = masked_accuracy(&predicted, labels, &splits.val);
    let (select_acc, select_loss) = if splits.val.is_empty() {
        (train_acc, loss)
    } else {
        (val_acc, cross_entropy(probabilities, labels, &splits.val)?)
    };
    Ok(EpochEval {
        loss,
        train_acc,
        val_acc,
        select_acc,
        select_loss,
    })
}

pub(crate) fn check_labels(labels: &[usize], n: usize, classes: usize) -> Result<()> {
    if labels.len() != n {
        return shape_err(format!("{} labels for {n} samples", labels.len()));
    }
    if let Some((i, &y)) = labels.iter().enumerate().find(|(_, &y)| y >= classes) {
        return arg_err(format!("label {y} at sample {i} outside 0..{classes}"));
    }
    Ok(())
}
