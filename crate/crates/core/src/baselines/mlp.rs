use serde::{Deserialize, Serialize};

use super::dense::{self, DenseCache, DenseLayer};
use super::{delta_for, fit, Classifier, FullBatch};
use crate::error::{arg_err, shape_err, Result};
use crate::optim::Optimizer;
use crate::split::Splits;
use crate::tensor::{Matrix, Rng};
use crate::training::TrainTrace;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    /// `[F + 2, hidden.., C]`.
    pub layer_dims: Vec<usize>,
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

impl Default for MlpConfig {
    fn default() -> Self {
        Self {
            layer_dims: vec![8, 32, 32, 4],
            learning_rate: 0.01,
            max_epochs: 2000,
            seed: 42,
            weight_init_scale: 1.0,
            optimizer: Optimizer::GradientDescent,
        }
    }
}

impl MlpConfig {
    pub fn validate(&self) -> Result<()> {
        if self.layer_dims.len() < 2 || self.layer_dims.contains(&0) {
            return arg_err(format!("invalid MLP layer sizes {:?}", self.layer_dims));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return arg_err("learning rate must be >= 0");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub layers: Vec<DenseLayer>,
    pub config: MlpConfig,
}

impl MlpModel {
    pub fn init(config: &MlpConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = Rng::new(config.seed);
        let layers = config
            .layer_dims
            .windows(2)
            .map(|d| DenseLayer::init(&mut rng, d[0], d[1], config.weight_init_scale))
            .collect();
        Ok(Self {
            layers,
            config: config.clone(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        dense::check_chain(&self.layers, &self.config.layer_dims)
    }

    fn check_input(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.config.layer_dims[0] {
            return shape_err(format!(
                "MLP expects {} input columns, got {}",
                self.config.layer_dims[0],
                x.cols()
            ));
        }
        Ok(())
    }

    /// All parameters, weights then bias per layer.
    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weight.data_mut(), l.bias.as_mut_slice()])
            .collect()
    }
}

impl Classifier for MlpModel {
    fn predict_proba(&self, samples: &Matrix) -> Result<Matrix> {
        self.check_input(samples)?;
        Ok(dense::forward(&self.layers, samples)?.probabilities)
    }
}

impl FullBatch for MlpModel {
    type Cache = DenseCache;

    fn classes(&self) -> usize {
        *self.config.layer_dims.last().unwrap()
    }

    fn forward_cached(&self, x: &Matrix) -> Result<(Matrix, DenseCache)> {
        let cache = dense::forward(&self.layers, x)?;
        Ok((cache.probabilities.clone(), cache))
    }

    fn gradients(&self, _x: &Matrix, cache: &DenseCache, delta: Matrix) -> Result<Vec<Vec<f64>>> {
        let g = dense::backward(&self.layers, cache, delta)?;
        Ok(g.weights
            .into_iter()
            .zip(g.biases)
            .flat_map(|(w, b)| [w.into_data(), b])
            .collect())
    }

    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        MlpModel::params_mut(self)
    }
}

/// Analytic gradients of the masked cross-entropy, ordered like
/// [`MlpModel::params_mut`].
pub fn mlp_gradients(
    model: &MlpModel,
    x: &Matrix,
    labels: &[usize],
    mask: &[usize],
) -> Result<Vec<Vec<f64>>> {
    model.check_input(x)?;
    let (probs, cache) = model.forward_cached(x)?;
    let delta = delta_for(&probs, labels, mask)?;
    model.gradients(x, &cache, delta)
}

/// Full-batch training on the rows in `splits.train`.
pub fn mlp_train(
    x: &Matrix,
    labels: &[usize],
    splits: &Splits,
    config: &MlpConfig,
) -> Result<(MlpModel, TrainTrace)> {
    let model = MlpModel::init(config)?;
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
