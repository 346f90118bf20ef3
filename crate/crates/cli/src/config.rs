use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use geogwl::baselines::{CnnConfig, MlpConfig};
use geogwl::datagen::{default_centers, Center, GenConfig};
use geogwl::geoggnn::GcnConfig;
use geogwl::geograph::{DistanceSource, KernelConfig, KernelMode};
use geogwl::optim::Optimizer;
use geogwl::pipeline::ModelSettings;
use geogwl::smoothlab::{ExperimentConfig, FieldConfig, Grid};

use crate::CliError;

/// Every setting of every command in one flat JSON object. Missing keys take
/// their defaults and unknown keys are rejected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Seeds the dataset, every model initialization and the smoothing trials.
    pub seed: u64,
    pub out: PathBuf,

    pub n: usize,
    pub features: usize,
    pub classes: usize,
    pub centers: Vec<Center>,
    pub cluster_std: f64,
    pub label_field_bandwidth: f64,
    pub feature_noise_std: f64,
    pub signal_strength: f64,
    pub split_fractions: [f64; 3],
    pub neighbors: usize,
    pub bumps_per_class: usize,

    pub kernel_mode: KernelMode,
    pub lambda: f64,
    pub phi: f64,
    pub distance_source: DistanceSource,

    pub optimizer: Optimizer,
    pub weight_init_scale: f64,
    pub gcn_hidden: Vec<usize>,
    pub gcn_learning_rate: f64,
    pub gcn_max_epochs: usize,
    pub mlp_hidden: Vec<usize>,
    pub mlp_learning_rate: f64,
    pub mlp_max_epochs: usize,
    pub cnn_kernel_size: usize,
    pub cnn_channels: usize,
    pub cnn_hidden: Vec<usize>,
    pub cnn_learning_rate: f64,
    pub cnn_max_epochs: usize,

    pub smooth_trials: usize,
    pub smooth_grid: usize,
    pub smooth_classes: usize,
    pub smooth_bumps_per_class: usize,
    pub smooth_bump_width: f64,
    pub smooth_noise_std: f64,
    /// In multiples of the grid spacing.
    pub smooth_bandwidths: Vec<f64>,
    pub smooth_variance_redraws: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let gen = GenConfig::default();
        let kernel = KernelConfig::default();
        let gcn = GcnConfig::default();
        let mlp = MlpConfig::default();
        let cnn = CnnConfig::default();
        let smooth = ExperimentConfig::default();
        Self {
            seed: gen.seed,
            out: PathBuf::from("out"),
            n: gen.n,
            features: gen.f,
            classes: gen.c,
            centers: default_centers(),
            cluster_std: gen.cluster_std,
            label_field_bandwidth: gen.label_field_bandwidth,
            feature_noise_std: gen.feature_noise_std,
            signal_strength: gen.signal_strength,
            split_fractions: gen.split_fractions,
            neighbors: gen.neighbors,
            bumps_per_class: gen.bumps_per_class,
            kernel_mode: kernel.mode,
            lambda: kernel.lambda,
            phi: kernel.phi,
            distance_source: kernel.distance_source,
            optimizer: gcn.optimizer,
            weight_init_scale: gcn.weight_init_scale,
            gcn_hidden: gcn.layer_dims[1..gcn.layer_dims.len() - 1].to_vec(),
            gcn_learning_rate: gcn.learning_rate,
            gcn_max_epochs: gcn.max_epochs,
            mlp_hidden: mlp.layer_dims[1..mlp.layer_dims.len() - 1].to_vec(),
            mlp_learning_rate: mlp.learning_rate,
            mlp_max_epochs: mlp.max_epochs,
            cnn_kernel_size: cnn.kernel_size,
            cnn_channels: cnn.channels,
            cnn_hidden: cnn.dense_dims[..cnn.dense_dims.len() - 1].to_vec(),
            cnn_learning_rate: cnn.learning_rate,
            cnn_max_epochs: cnn.max_epochs,
            smooth_trials: smooth.trials,
            smooth_grid: smooth.grid.nx,
            smooth_classes: smooth.field.classes,
            smooth_bumps_per_class: smooth.field.bumps_per_class,
            smooth_bump_width: smooth.field.bump_width,
            smooth_noise_std: smooth.noise_std,
            smooth_bandwidths: smooth.bandwidth_multiples,
            smooth_variance_redraws: smooth.variance_redraws,
        }
    }
}

fn chain(first: usize, hidden: &[usize], last: usize) -> Vec<usize> {
    let mut v = vec![first];
    v.extend(hidden);
    v.push(last);
    v
}

impl RunConfig {
    /// Reads a config file (or the defaults) and applies command-line
    /// overrides.
    pub fn load(path: Option<&Path>, seed: Option<u64>, out: Option<&Path>) -> Result<Self, CliError> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", p.display())))?;
                serde_json::from_str(&text)
                    .map_err(|e| CliError::Usage(format!("invalid config {}: {e}", p.display())))?
            }
            None => RunConfig::default(),
        };
        if let Some(s) = seed {
            cfg.seed = s;
        }
        if let Some(o) = out {
            cfg.out = o.to_path_buf();
        }
        Ok(cfg)
    }

    pub fn gen_config(&self) -> GenConfig {
        GenConfig {
            seed: self.seed,
            n: self.n,
            f: self.features,
            c: self.classes,
            centers: self.centers.clone(),
            cluster_std: self.cluster_std,
            label_field_bandwidth: self.label_field_bandwidth,
            feature_noise_std: self.feature_noise_std,
            split_fractions: self.split_fractions,
            neighbors: self.neighbors,
            bumps_per_class: self.bumps_per_class,
            signal_strength: self.signal_strength,
        }
    }

    pub fn kernel_config(&self) -> KernelConfig {
        KernelConfig {
            mode: self.kernel_mode,
            lambda: self.lambda,
            phi: self.phi,
            distance_source: self.distance_source,
            ..KernelConfig::default()
        }
    }

    /// Input and output widths follow `features` and `classes`; baselines
    /// see two extra columns for latitude and longitude.
    pub fn model_settings(&self) -> ModelSettings {
        let (f, c) = (self.features, self.classes);
        ModelSettings {
            kernel: self.kernel_config(),
            gcn: GcnConfig {
                layer_dims: chain(f, &self.gcn_hidden, c),
                learning_rate: self.gcn_learning_rate,
                max_epochs: self.gcn_max_epochs,
                seed: self.seed,
                weight_init_scale: self.weight_init_scale,
                optimizer: self.optimizer,
            },
            mlp: MlpConfig {
                layer_dims: chain(f + 2, &self.mlp_hidden, c),
                learning_rate: self.mlp_learning_rate,
                max_epochs: self.mlp_max_epochs,
                seed: self.seed,
                weight_init_scale: self.weight_init_scale,
                optimizer: self.optimizer,
            },
            cnn: CnnConfig {
                input_len: f + 2,
                kernel_size: self.cnn_kernel_size,
                channels: self.cnn_channels,
                dense_dims: chain(0, &self.cnn_hidden, c)[1..].to_vec(),
                learning_rate: self.cnn_learning_rate,
                max_epochs: self.cnn_max_epochs,
                seed: self.seed,
                weight_init_scale: self.weight_init_scale,
                optimizer: self.optimizer,
            },
        }
    }

    pub fn experiment_config(&self) -> ExperimentConfig {
        ExperimentConfig {
            trials: self.smooth_trials,
            seed: self.seed,
            grid: Grid::unit_square(self.smooth_grid),
            field: FieldConfig {
                classes: self.smooth_classes,
                bumps_per_class: self.smooth_bumps_per_class,
                bump_width: self.smooth_bump_width,
                ..FieldConfig::default()
            },
            noise_std: self.smooth_noise_std,
            bandwidth_multiples: self.smooth_bandwidths.clone(),
            variance_redraws: self.smooth_variance_redraws,
        }
    }

    /// SHA-256 over the canonical JSON of every setting except the output
    /// directory, which does not affect results.
    pub fn fingerprint(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(m) = v.as_object_mut() {
            m.remove("out");
        }
        hex::encode(Sha256::digest(v.to_string().as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_reproduce_library_defaults() {
        let c = RunConfig::default();
        let s = c.model_settings();
        assert_eq!(s.gcn, GcnConfig { seed: 42, ..GcnConfig::default() });
        assert_eq!(s.mlp, MlpConfig::default());
        assert_eq!(s.cnn, CnnConfig::default());
        assert_eq!(c.gen_config(), GenConfig::default());
        assert_eq!(c.experiment_config(), ExperimentConfig::default());
    }

    #[test]
    fn unknown_keys_are_rejected_and_missing_ones_default() {
        let c: RunConfig = serde_json::from_str(r#"{"n": 100}"#).unwrap();
        assert_eq!(c.n, 100);
        assert_eq!(c.phi, 0.25);
        assert!(serde_json::from_str::<RunConfig>(r#"{"nodes": 100}"#).is_err());
    }

    #[test]
    fn fingerprint_ignores_output_directory() {
        let a = RunConfig::default();
        let b = RunConfig {
            out: "elsewhere".into(),
            ..a.clone()
        };
        assert_eq!(a.fingerprint(), b.fingerprint());
        assert_eq!(a.fingerprint().len(), 64);
        let c = RunConfig { seed: 1, ..a.clone() };
        assert_ne!(a.fingerprint(), c.fingerprint());
    }
}
