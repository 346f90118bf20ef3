use std::path::Path;
use std::process::Command;

use geogwl::baselines::{DenseLayer, MlpConfig, MlpModel};
use geogwl::datagen::{self, DatasetMeta, SpatialDataset};
use geogwl::geograph::GeoPoint;
use geogwl::pipeline::{predict_dataset, ModelKind, SavedModel, TrainedModel, FORMAT_VERSION};
use geogwl::split::Splits;
use geogwl::tensor::{Matrix, Standardizer};
use geogwl_cli::{commands, RunConfig};
use sha2::{Digest, Sha256};

/// SHA-256 of `dataset.csv` generated from the default config.
const DEFAULT_DATASET_SHA256: &str = "945c0e3fc58cebaef6de2bfab781e4a513707da5ad4103a473d0d50398d6a86f";

fn quick(out: &Path) -> RunConfig {
    RunConfig {
        out: out.to_path_buf(),
        gcn_max_epochs: 60,
        mlp_max_epochs: 60,
        cnn_max_epochs: 60,
        ..RunConfig::default()
    }
}

fn bin(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_geogwl"))
        .args(args)
        .output()
        .unwrap()
}

#[test]
fn default_dataset_matches_golden_hash() {
    let dir = tempfile::tempdir().unwrap();
    let csv = commands::generate(&quick(dir.path())).unwrap();
    let bytes = std::fs::read(&csv).unwrap();
    assert_eq!(String::from_utf8_lossy(&bytes).lines().count(), 401);
    assert_eq!(hex::encode(Sha256::digest(&bytes)), DEFAULT_DATASET_SHA256);
}

#[test]
fn train_writes_one_trace_row_per_epoch() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = quick(dir.path());
    let csv = commands::generate(&cfg).unwrap();
    for kind in ModelKind::ALL {
        let out = commands::train(&cfg, kind, &csv).unwrap();
        let trace = std::fs::read_to_string(&out.trace).unwrap();
        assert_eq!(trace.lines().count(), 61, "{kind}");
        assert!(trace.starts_with("epoch,loss,train_accuracy,val_accuracy\n"));
        SavedModel::from_json(&std::fs::read_to_string(&out.model).unwrap()).unwrap();
    }
}

#[test]
fn evaluation_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = quick(dir.path());
    let csv = commands::generate(&cfg).unwrap();
    let trained = commands::train(&cfg, ModelKind::Geoggnn, &csv).unwrap();
    let eval_cfg = RunConfig {
        out: dir.path().join("eval"),
        ..cfg.clone()
    };
    let report = commands::evaluate(&eval_cfg, &trained.model, &csv, None).unwrap();

    for name in ["roc.svg", "pr.svg", "confusion.svg", "loss.svg"] {
        let text = std::fs::read_to_string(eval_cfg.out.join(name)).unwrap();
        let doc = roxmltree::Document::parse(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(doc.root_element().tag_name().name(), "svg");
    }

    // Curve rows: one per distinct score plus the anchor point.
    let saved = SavedModel::from_json(&std::fs::read_to_string(&trained.model).unwrap()).unwrap();
    let ds = commands::load_dataset(&csv, &cfg).unwrap();
    let probs = predict_dataset(&saved, &ds).unwrap().select_rows(&ds.splits.test);
    for k in 0..4 {
        let mut scores = probs.column(k);
        scores.sort_by(f64::total_cmp);
        scores.dedup();
        for prefix in ["roc", "pr"] {
            let text = std::fs::read_to_string(eval_cfg.out.join(format!("{prefix}_class{k}.csv"))).unwrap();
            assert_eq!(text.lines().count() - 1, scores.len() + 1, "{prefix} class {k}");
        }
    }
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(eval_cfg.out.join("report.json")).unwrap()).unwrap();
    assert_eq!(json["samples"], report.samples);
}

/// Features one-hot encode the label, and a single linear layer reads
/// them off.
fn perfect_fixture(dir: &Path) -> (std::path::PathBuf, std::path::PathBuf) {
    let n = 40;
    let labels: Vec<usize> = (0..n).map(|i| i % 4).collect();
    let mut features = Matrix::zeros(n, 4);
    for (i, &y) in labels.iter().enumerate() {
        features.set(i, y, 10.0);
    }
    let ds = SpatialDataset {
        features,
        coords: (0..n).map(|i| GeoPoint::new(24.0 + i as f64 * 0.1, 50.0).unwrap()).collect(),
        splits: Splits {
            train: (0..24).collect(),
            val: (24..32).collect(),
            test: (32..40).collect(),
        },
        labels,
        classes: 4,
        meta: DatasetMeta {
            seed: 0,
            generator_version: "fixture".into(),
            class_names: datagen::default_class_names(4),
        },
    };
    let mut weight = Matrix::zeros(6, 4);
    for k in 0..4 {
        weight.set(k, k, 1.0);
    }
    let saved = SavedModel {
        format_version: FORMAT_VERSION,
        standardizer: Standardizer {
            means: vec![0.0; 6],
            stds: vec![1.0; 6],
        },
        trained: TrainedModel::Nn {
            model: MlpModel {
                layers: vec![DenseLayer {
                    weight,
                    bias: vec![0.0; 4],
                }],
                config: MlpConfig {
                    layer_dims: vec![6, 4],
                    ..MlpConfig::default()
                },
            },
        },
    };
    let data = dir.join("perfect.csv");
    let model = dir.join("perfect_model.json");
    datagen::save(&ds, &data).unwrap();
    std::fs::write(&model, saved.to_json().unwrap()).unwrap();
    (data, model)
}

#[test]
fn perfect_model_scores_one() {
    let dir = tempfile::tempdir().unwrap();
    let (data, model) = perfect_fixture(dir.path());
    let cfg = quick(&dir.path().join("eval"));
    let report = commands::evaluate(&cfg, &model, &data, None).unwrap();
    assert_eq!(report.accuracy, 1.0);
    let text = std::fs::read_to_string(cfg.out.join("report.json")).unwrap();
    assert!(text.contains("\"accuracy\": 1.000000"), "{text}");
    assert!(!cfg.out.join("loss.svg").exists());
}

#[test]
fn benchmark_table_has_one_row_per_model() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig {
        n: 120,
        ..quick(dir.path())
    };
    let t = commands::benchmark(&cfg).unwrap();
    assert_eq!(t.rows.len(), 3);
    let text = std::fs::read_to_string(dir.path().join("benchmark.txt")).unwrap();
    assert!(text.starts_with("Model"));
    assert!(text.contains("Log-Loss") && text.contains(&cfg.fingerprint()));
    for kind in ModelKind::ALL {
        assert!(t.row(kind).unwrap().report.log_loss.is_finite());
    }
    let timings: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("timings.json")).unwrap()).unwrap();
    assert!(timings["geoggnn"].as_f64().unwrap() >= 0.0);
}

#[test]
fn smoothlab_outputs_and_noiseless_note() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig {
        smooth_trials: 4,
        smooth_grid: 16,
        smooth_variance_redraws: 5,
        ..quick(dir.path())
    };
    let s = commands::smoothlab(&cfg).unwrap();
    assert_eq!(s.trials, 4);
    let csv = std::fs::read_to_string(dir.path().join("smoothlab.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 4 * cfg.smooth_bandwidths.len());
    let again = std::fs::read_to_string(dir.path().join("smoothlab_summary.json")).unwrap();
    commands::smoothlab(&cfg).unwrap();
    assert_eq!(again, std::fs::read_to_string(dir.path().join("smoothlab_summary.json")).unwrap());

    let quiet = RunConfig {
        smooth_noise_std: 0.0,
        ..cfg
    };
    assert_eq!(commands::smoothlab(&quiet).unwrap().win_rate, 0.0);
    let summary = std::fs::read_to_string(dir.path().join("smoothlab_summary.json")).unwrap();
    assert!(summary.contains("\"note\""));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let ok = bin(&["generate", "--out", d, "--seed", "3"]);
    assert_eq!(ok.status.code(), Some(0));
    let data = format!("{d}/dataset.csv");

    assert_eq!(bin(&["train", "--model", "gcn", "--data", &data]).status.code(), Some(1));
    assert_eq!(bin(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(bin(&["--help"]).status.code(), Some(0));

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"split_fractions": [0.5, 0.5, 0.5]}"#).unwrap();
    let out = bin(&["generate", "--config", bad.to_str().unwrap(), "--out", d]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("split fractions"));

    std::fs::write(&bad, r#"{"nodes": 10}"#).unwrap();
    assert_eq!(bin(&["generate", "--config", bad.to_str().unwrap()]).status.code(), Some(1));

    let text = std::fs::read_to_string(&data).unwrap();
    let broken = dir.path().join("broken.csv");
    std::fs::write(&broken, text.replacen(",train\n", ",nowhere\n", 1)).unwrap();
    let out = bin(&["train", "--model", "nn", "--data", broken.to_str().unwrap(), "--out", d]);
    assert_eq!(out.status.code(), Some(2));

    std::fs::write(&bad, r#"{"gcn_learning_rate": 1e300, "gcn_max_epochs": 5}"#).unwrap();
    let out = bin(&["train", "--model", "geoggnn", "--data", &data, "--config", bad.to_str().unwrap(), "--out", d]);
    assert_eq!(out.status.code(), Some(3));
}
