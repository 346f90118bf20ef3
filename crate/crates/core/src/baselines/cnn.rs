use serde::{Deserialize, Serialize};

use super::dense::{self, DenseCache, DenseLayer};
use super::{delta_for, fit, Classifier, FullBatch};
use crate::error::{arg_err, shape_err, Result};
use crate::optim::Optimizer;
use crate::split::Splits;
use crate::tensor::{relu, Matrix, Rng};
use crate::training::TrainTrace;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CnnConfig {
    /// Length of the single-channel input signal (`F + 2`).
    pub input_len: usize,
    pub kernel_size: usize,
    pub channels: usize,
    /// Dense sizes after the flattened convolution output: `[hidden.., C]`.
    pub dense_dims: Vec<usize>,
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub seed: u64,
    #[serde(default = "one")]
    pub weight_init_scale: f64,
    #[serde(default)]
    pub optimizer: Optimizer,
}

fn one() -> f64 {
    1.0
}

impl Default for CnnConfig {
    fn default() -> Self {
        Self {
            input_len: 8,
            kernel_size: 3,
            channels: 8,
            dense_dims: vec![32, 4],
            learning_rate: 0.01,
            max_epochs: 2000,
            seed: 42,
            weight_init_scale: 1.0,
            optimizer: Optimizer::GradientDescent,
        }
    }
}

impl CnnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.kernel_size == 0 || self.kernel_size > self.input_len {
            return arg_err(format!(
                "kernel_size {} must be in 1..={} (input length)",
                self.kernel_size, self.input_len
            ));
        }
        if self.channels == 0 || self.dense_dims.is_empty() || self.dense_dims.contains(&0) {
            return arg_err("channels and dense sizes must be positive");
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return arg_err("learning rate must be >= 0");
        }
        Ok(())
    }

    /// Valid-mode output length per channel.
    pub fn conv_len(&self) -> usize {
        self.input_len - self.kernel_size + 1
    }

    fn full_dense_dims(&self) -> Vec<usize> {
        let mut d = vec![self.channels * self.conv_len()];
        d.extend(&self.dense_dims);
        d
    }
}

/// `channels` filters of width `kernel_size` sliding over one input channel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Conv1d {
    /// `channels x kernel_size`.
    pub kernels: Matrix,
    pub bias: Vec<f64>,
}

impl Conv1d {
    /// Pre-activations laid out channel-major: column `c * T + t`.
    fn apply(&self, x: &Matrix) -> Matrix {
        let (ch, k) = self.kernels.shape();
        let t_len = x.cols() - k + 1;
        let mut out = Matrix::zeros(x.rows(), ch * t_len);
        for i in 0..x.rows() {
            let xi = x.row(i);
            let oi = out.row_mut(i);
            for c in 0..ch {
                let kc = self.kernels.row(c);
                for t in 0..t_len {
                    let s: f64 = kc.iter().zip(&xi[t..t + k]).map(|(a, b)| a * b).sum();
                    oi[c * t_len + t] = s + self.bias[c];
                }
            }
        }
        out
    }

    /// Kernel and bias gradients from the gradient at the pre-activations.
    fn grads(&self, x: &Matrix, dz: &Matrix) -> (Matrix, Vec<f64>) {
        let (ch, k) = self.kernels.shape();
        let t_len = x.cols() - k + 1;
        let mut dk = Matrix::zeros(ch, k);
        let mut db = vec![0.0; ch];
        for i in 0..x.rows() {
            let xi = x.row(i);
            let di = dz.row(i);
            for c in 0..ch {
                for t in 0..t_len {
                    let g = di[c * t_len + t];
                    if g == 0.0 {
                        continue;
                    }
                    db[c] += g;
                    for (s, dv) in dk.row_mut(c).iter_mut().enumerate() {
                        *dv += g * xi[t + s];
                    }
                }
            }
        }
        (dk, db)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CnnModel {
    pub conv: Conv1d,
    pub dense: Vec<DenseLayer>,
    pub config: CnnConfig,
}

pub struct CnnCache {
    conv_pre: Matrix,
    dense: DenseCache,
}

impl CnnModel {
    pub fn init(config: &CnnConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = Rng::new(config.seed);
        let kernels = crate::geoggnn::glorot(&mut rng, config.kernel_size, config.channels, config.weight_init_scale)
            .transpose();
        let conv = Conv1d {
            kernels,
            bias: vec![0.0; config.channels],
        };
        let dense = config
            .full_dense_dims()
            .windows(2)
            .map(|d| DenseLayer::init(&mut rng, d[0], d[1], config.weight_init_scale))
            .collect();
        Ok(Self {
            conv,
            dense,
            config: config.clone(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        if self.conv.kernels.shape() != (self.config.channels, self.config.kernel_size)
            || self.conv.bias.len() != self.config.channels
        {
            return shape_err(format!(
                "conv kernels {:?} do not match {} channels of width {}",
                self.conv.kernels.shape(),
                self.config.channels,
                self.config.kernel_size
            ));
        }
        dense::check_chain(&self.dense, &self.config.full_dense_dims())
    }

    fn check_input(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.config.input_len {
            return shape_err(format!(
                "CNN expects signals of length {}, got {}",
                self.config.input_len,
                x.cols()
            ));
        }
        Ok(())
    }

    /// Conv kernels, conv bias, then weights and bias of each dense layer.
    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = vec![self.conv.kernels.data_mut(), self.conv.bias.as_mut_slice()];
        for l in &mut self.dense {
            out.push(l.weight.data_mut());
            out.push(l.bias.as_mut_slice());
        }
        out
    }
}

impl Classifier for CnnModel {
    fn predict_proba(&self, samples: &Matrix) -> Result<Matrix> {
        self.check_input(samples)?;
        Ok(self.forward_cached(samples)?.0)
    }
}

impl FullBatch for CnnModel {
    type Cache = CnnCache;

    fn classes(&self) -> usize {
        *self.config.dense_dims.last().unwrap()
    }

    fn forward_cached(&self, x: &Matrix) -> Result<(Matrix, CnnCache)> {
        let conv_pre = self.conv.apply(x);
        let dense = dense::forward(&self.dense, &relu(&conv_pre))?;
        Ok((dense.probabilities.clone(), CnnCache { conv_pre, dense }))
    }

    fn gradients(&self, x: &Matrix, cache: &CnnCache, delta: Matrix) -> Result<Vec<Vec<f64>>> {
        let g = dense::backward(&self.dense, &cache.dense, delta)?;
        let mut dz = g.input;
        for (d, &z) in dz.data_mut().iter_mut().zip(cache.conv_pre.data()) {
            if z <= 0.0 {
                *d = 0.0;
            }
        }
        let (dk, db) = self.conv.grads(x, &dz);
        let mut out = vec![dk.into_data(), db];
        for (w, b) in g.weights.into_iter().zip(g.biases) {
            out.push(w.into_data());
            out.push(b);
        }
        Ok(out)
    }

    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        CnnModel::params_mut(self)
    }
}

/// Analytic gradients ordered like [`CnnModel::params_mut`].
pub fn cnn_gradients(
    model: &CnnModel,
    x: &Matrix,
    labels: &[usize],
    mask: &[usize],
) -> Result<Vec<Vec<f64>>> {
    model.check_input(x)?;
    let (probs, cache) = model.forward_cached(x)?;
    let delta = delta_for(&probs, labels, mask)?;
    model.gradients(x, &cache, delta)
}

pub fn cnn_train(
    x: &Matrix,
    labels: &[usize],
    splits: &Splits,
    config: &CnnConfig,
) -> Result<(CnnModel, TrainTrace)> {
    let model = CnnModel::init(config)?;
    model.check_input(x)?;
    fit(
        model,
        x,
        labels,
        splits,
        config.learning_rate,
        config.optimizer,
        config.max_epochs,
    )
}
