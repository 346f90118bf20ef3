//! End-to-end glue: feature preparation, training any of the three models
//! on a dataset, and a versioned JSON format for trained models.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baselines::{
    cnn_train, coords_as_features, mlp_train, Classifier, CnnConfig, CnnModel, MlpConfig, MlpModel,
};
use crate::datagen::SpatialDataset;
use crate::error::{shape_err, Error, Result};
use crate::geoggnn::{self, GcnConfig, GcnModel};
use crate::geograph::{build_dataset_graph, KernelConfig};
use crate::tensor::{standardize_columns, Matrix, Rng, Standardizer};
use crate::training::TrainTrace;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Geoggnn,
    Nn,
    Cnn,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Geoggnn, ModelKind::Nn, ModelKind::Cnn];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Geoggnn => "geoggnn",
            ModelKind::Nn => "nn",
            ModelKind::Cnn => "cnn",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "geoggnn" => Ok(ModelKind::Geoggnn),
            "nn" => Ok(ModelKind::Nn),
            "cnn" => Ok(ModelKind::Cnn),
            other => Err(Error::InvalidArgument(format!(
                "unknown model {other:?}; expected geoggnn, nn or cnn"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TrainedModel {
    Geoggnn {
        model: GcnModel,
        kernel: KernelConfig,
    },
    Nn {
        model: MlpModel,
    },
    Cnn {
        model: CnnModel,
    },
}

impl TrainedModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            TrainedModel::Geoggnn { .. } => ModelKind::Geoggnn,
            TrainedModel::Nn { .. } => ModelKind::Nn,
            TrainedModel::Cnn { .. } => ModelKind::Cnn,
        }
    }
}

/// A trained model plus everything needed to score a dataset with it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SavedModel {
    pub format_version: u32,
    /// Fitted on the columns the model consumes: node features for the graph
    /// model, node features plus latitude and longitude for the baselines.
    pub standardizer: Standardizer,
    pub trained: TrainedModel,
}

impl SavedModel {
    pub fn validate(&self) -> Result<()> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::Validation(format!(
                "model format version {} is not supported (expected {FORMAT_VERSION})",
                self.format_version
            )));
        }
        let (inputs, check) = match &self.trained {
            TrainedModel::Geoggnn { model, kernel } => {
                kernel.validate()?;
                (model.config.layer_dims[0], model.validate())
            }
            TrainedModel::Nn { model } => (model.config.layer_dims[0], model.validate()),
            TrainedModel::Cnn { model } => (model.config.input_len, model.validate()),
        };
        check.map_err(|e| Error::Validation(format!("model weights: {e}")))?;
        let s = &self.standardizer;
        if s.means.len() != inputs || s.stds.len() != inputs {
            return Err(Error::Validation(format!(
                "standardizer covers {} columns but the model takes {inputs}",
                s.means.len()
            )));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: SavedModel = serde_json::from_str(text)
            .map_err(|e| Error::Validation(format!("malformed model file: {e}")))?;
        m.validate()?;
        Ok(m)
    }

    pub fn classes(&self) -> usize {
        match &self.trained {
            TrainedModel::Geoggnn { model, .. } => model.config.classes(),
            TrainedModel::Nn { model } => *model.config.layer_dims.last().unwrap(),
            TrainedModel::Cnn { model } => *model.config.dense_dims.last().unwrap(),
        }
    }
}

/// Model settings for all three kinds.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ModelSettings {
    pub kernel: KernelConfig,
    pub gcn: GcnConfig,
    pub mlp: MlpConfig,
    pub cnn: CnnConfig,
}

fn baseline_inputs(ds: &SpatialDataset) -> Result<Matrix> {
    coords_as_features(&ds.features, &ds.coords)
}

/// Trains one model on `ds.splits.train`, selecting on `ds.splits.val`.
pub fn train_model(
    kind: ModelKind,
    ds: &SpatialDataset,
    settings: &ModelSettings,
) -> Result<(SavedModel, TrainTrace)> {
    ds.validate()?;
    let (trained, standardizer, trace) = match kind {
        ModelKind::Geoggnn => {
            let (x, std) = standardize_columns(&ds.features)?;
            let graph = build_dataset_graph(&ds.coords, &x, &settings.kernel)?;
            let init = geoggnn::init_model(&settings.gcn, &mut Rng::new(settings.gcn.seed))?;
            let (model, trace) = geoggnn::train(&init, &graph, &x, &ds.labels, &ds.splits)?;
            let trained = TrainedModel::Geoggnn {
                model,
                kernel: settings.kernel.clone(),
            };
            (trained, std, trace)
        }
        ModelKind::Nn => {
            let (x, std) = standardize_columns(&baseline_inputs(ds)?)?;
            let (model, trace) = mlp_train(&x, &ds.labels, &ds.splits, &settings.mlp)?;
            (TrainedModel::Nn { model }, std, trace)
        }
        ModelKind::Cnn => {
            let (x, std) = standardize_columns(&baseline_inputs(ds)?)?;
            let (model, trace) = cnn_train(&x, &ds.labels, &ds.splits, &settings.cnn)?;
            (TrainedModel::Cnn { model }, std, trace)
        }
    };
    let saved = SavedModel {
        format_version: FORMAT_VERSION,
        standardizer,
        trained,
    };
    Ok((saved, trace))
}

/// Class probabilities for every node of `ds`.
pub fn predict_dataset(saved: &SavedModel, ds: &SpatialDataset) -> Result<Matrix> {
    saved.validate()?;
    if saved.classes() != ds.classes {
        return shape_err(format!(
            "model predicts {} classes, dataset has {}",
            saved.classes(),
            ds.classes
        ));
    }
    match &saved.trained {
        TrainedModel::Geoggnn { model, kernel } => {
            let x = saved.standardizer.apply(&ds.features)?;
            let graph = build_dataset_graph(&ds.coords, &x, kernel)?;
            Ok(geoggnn::predict(model, &graph, &x)?.1)
        }
        TrainedModel::Nn { model } => model.predict_proba(&saved.standardizer.apply(&baseline_inputs(ds)?)?),
        TrainedModel::Cnn { model } => model.predict_proba(&saved.standardizer.apply(&baseline_inputs(ds)?)?),
    }
}
