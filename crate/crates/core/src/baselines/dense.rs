use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Result};
use crate::tensor::{matmul, matmul_nt, matmul_tn, relu, relu_grad, softmax_rows, Matrix, Rng};

/// Fully connected layer `X W + b`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

impl DenseLayer {
    pub(crate) fn init(rng: &mut Rng, fan_in: usize, fan_out: usize, scale: f64) -> Self {
        Self {
            weight: crate::geoggnn::glorot(rng, fan_in, fan_out, scale),
            bias: vec![0.0; fan_out],
        }
    }

    fn apply(&self, x: &Matrix) -> Result<Matrix> {
        let mut z = matmul(x, &self.weight)?;
        for r in 0..z.rows() {
            for (v, b) in z.row_mut(r).iter_mut().zip(&self.bias) {
                *v += b;
            }
        }
        Ok(z)
    }
}

pub(crate) fn check_chain(layers: &[DenseLayer], dims: &[usize]) -> Result<()> {
    if layers.len() + 1 != dims.len() {
        return shape_err(format!(
            "{} dense layers for dims {:?}",
            layers.len(),
            dims
        ));
    }
    for (l, layer) in layers.iter().enumerate() {
        if layer.weight.shape() != (dims[l], dims[l + 1]) || layer.bias.len() != dims[l + 1] {
            return shape_err(format!(
                "dense layer {l} is {:?} with {} biases, expected {}x{}",
                layer.weight.shape(),
                layer.bias.len(),
                dims[l],
                dims[l + 1]
            ));
        }
    }
    Ok(())
}

pub(crate) struct DenseCache {
    /// Input of every layer.
    pub inputs: Vec<Matrix>,
    pub pre: Vec<Matrix>,
    pub probabilities: Matrix,
}

/// ReLU between layers, softmax after the last.
pub(crate) fn forward(layers: &[DenseLayer], x: &Matrix) -> Result<DenseCache> {
    let mut inputs = vec![x.clone()];
    let mut pre = Vec::with_capacity(layers.len());
    for (l, layer) in layers.iter().enumerate() {
        let z = layer.apply(&inputs[l])?;
        if l + 1 < layers.len() {
            inputs.push(relu(&z));
        }
        pre.push(z);
    }
    let probabilities = softmax_rows(pre.last().expect("at least one layer"));
    Ok(DenseCache {
        inputs,
        pre,
        probabilities,
    })
}

pub(crate) struct DenseGrads {
    pub weights: Vec<Matrix>,
    pub biases: Vec<Vec<f64>>,
    /// Gradient with respect to the stack's input.
    pub input: Matrix,
}

/// Backpropagates `delta` (gradient at the final logits).
pub(crate) fn backward(layers: &[DenseLayer], cache: &DenseCache, mut delta: Matrix) -> Result<DenseGrads> {
    let n = layers.len();
    let mut weights = vec![Matrix::zeros(0, 0); n];
    let mut biases = vec![Vec::new(); n];
    for l in (0..n).rev() {
        weights[l] = matmul_tn(&cache.inputs[l], &delta)?;
        biases[l] = delta.sum_rows();
        let upstream = matmul_nt(&delta, &layers[l].weight)?;
        delta = if l > 0 {
            upstream.hadamard(&relu_grad(&cache.pre[l - 1]))?
        } else {
            upstream
        };
    }
    Ok(DenseGrads {
        weights,
        biases,
        input: delta,
    })
}
