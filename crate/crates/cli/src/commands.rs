use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::ser::SerializeStruct;
use serde::{Deserialize, Serialize, Serializer};

use geogwl::datagen::{self, DatasetMeta, GenConfig, SpatialDataset, GENERATOR_VERSION};
use geogwl::metrics::{evaluate as score, EvalReport, Fixed6};
use geogwl::pipeline::{predict_dataset, train_model, ModelKind, ModelSettings, SavedModel};
use geogwl::smoothlab::{run_experiment, Summary};

use crate::config::RunConfig;
use crate::svg::{self, Series};
use crate::CliError;

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.to_path_buf(),
        source,
    })
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("plain data serializes") + "\n"
}

/// Sidecar written next to a dataset CSV.
#[derive(Debug, Serialize, Deserialize)]
pub struct MetaFile {
    pub seed: u64,
    pub generator_version: String,
    pub class_names: Vec<String>,
    pub class_counts: Vec<usize>,
    pub config: GenConfig,
}

pub fn meta_path(csv: &Path) -> PathBuf {
    csv.with_extension("meta.json")
}

/// Loads a dataset CSV, taking class names from its sidecar when present
/// and the configured class count otherwise.
pub fn load_dataset(path: &Path, cfg: &RunConfig) -> Result<SpatialDataset, CliError> {
    let side = meta_path(path);
    let meta = if side.exists() {
        let m: MetaFile = serde_json::from_str(&read(&side)?)
            .map_err(|e| geogwl::Error::Validation(format!("{}: {e}", side.display())))?;
        DatasetMeta {
            seed: m.seed,
            generator_version: m.generator_version,
            class_names: m.class_names,
        }
    } else {
        DatasetMeta {
            seed: cfg.seed,
            generator_version: "unknown".into(),
            class_names: datagen::default_class_names(cfg.classes),
        }
    };
    let classes = meta.class_names.len();
    Ok(datagen::from_csv(&read(path)?, classes, meta)?)
}

fn write_dataset(ds: &SpatialDataset, gen: &GenConfig, csv: &Path) -> Result<(), CliError> {
    write(csv, &datagen::to_csv(ds))?;
    let meta = MetaFile {
        seed: ds.meta.seed,
        generator_version: GENERATOR_VERSION.to_owned(),
        class_names: ds.meta.class_names.clone(),
        class_counts: ds.class_counts(),
        config: gen.clone(),
    };
    write(&meta_path(csv), &to_json(&meta))
}

pub fn generate(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    let gen = cfg.gen_config();
    let ds = datagen::generate(&gen)?;
    ensure_dir(&cfg.out)?;
    let csv = cfg.out.join("dataset.csv");
    write_dataset(&ds, &gen, &csv)?;
    Ok(csv)
}

pub struct TrainOutputs {
    pub model: PathBuf,
    pub trace: PathBuf,
    pub best_epoch: usize,
}

pub fn train(cfg: &RunConfig, kind: ModelKind, data: &Path) -> Result<TrainOutputs, CliError> {
    let ds = load_dataset(data, cfg)?;
    let (saved, trace) = train_model(kind, &ds, &cfg.model_settings())?;
    ensure_dir(&cfg.out)?;
    let model = cfg.out.join(format!("model_{kind}.json"));
    let trace_path = cfg.out.join(format!("trace_{kind}.csv"));
    write(&model, &(saved.to_json()? + "\n"))?;
    write(&trace_path, &trace.to_csv())?;
    Ok(TrainOutputs {
        model,
        trace: trace_path,
        best_epoch: trace.best_epoch,
    })
}

/// Loss column of a trace CSV.
fn read_losses(path: &Path) -> Result<Vec<f64>, CliError> {
    let text = read(path)?;
    text.lines()
        .skip(1)
        .filter(|l| !l.is_empty())
        .enumerate()
        .map(|(k, l)| {
            l.split(',')
                .nth(1)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| {
                    geogwl::Error::Validation(format!("{} row {}: bad loss", path.display(), k + 2)).into()
                })
        })
        .collect()
}

/// Scores the model on the test split and writes the report, per-class
/// curves and charts into `cfg.out`.
pub fn evaluate(
    cfg: &RunConfig,
    model_path: &Path,
    data: &Path,
    trace: Option<&Path>,
) -> Result<EvalReport, CliError> {
    let saved = SavedModel::from_json(&read(model_path)?)?;
    let ds = load_dataset(data, cfg)?;
    let probs = predict_dataset(&saved, &ds)?;
    let test = &ds.splits.test;
    let report = score(&probs.select_rows(test), &ds.labels_at(test), ds.classes)?;

    let out = &cfg.out;
    ensure_dir(out)?;
    write(&out.join("report.json"), &(report.to_json()? + "\n"))?;
    let names = &ds.meta.class_names;
    let mut roc_series = Vec::new();
    let mut pr_series = Vec::new();
    for (k, c) in report.per_class.iter().enumerate() {
        if let Some(roc) = &c.roc {
            write(&out.join(format!("roc_class{k}.csv")), &roc.to_csv("fpr", "tpr"))?;
            roc_series.push((k, roc.points.clone()));
        }
        if let Some(pr) = &c.pr {
            write(&out.join(format!("pr_class{k}.csv")), &pr.to_csv("recall", "precision"))?;
            pr_series.push((k, pr.points.clone()));
        }
    }
    let series = |v: &[(usize, Vec<(f64, f64)>)]| -> Vec<(String, Vec<(f64, f64)>)> {
        v.iter().map(|(k, p)| (names[*k].clone(), p.clone())).collect()
    };
    let unit = Some(((0.0, 1.0), (0.0, 1.0)));
    let kind = saved.trained.kind();
    let chart = |title: &str, x: &str, y: &str, s: &[(String, Vec<(f64, f64)>)]| {
        let s: Vec<Series> = s.iter().map(|(n, p)| Series { name: n, points: p }).collect();
        svg::line_chart(title, x, y, &s, unit)
    };
    write(
        &out.join("roc.svg"),
        &chart(&format!("{kind}: ROC (test split)"), "false positive rate", "true positive rate", &series(&roc_series)),
    )?;
    write(
        &out.join("pr.svg"),
        &chart(&format!("{kind}: precision-recall (test split)"), "recall", "precision", &series(&pr_series)),
    )?;
    write(
        &out.join("confusion.svg"),
        &svg::confusion_grid(&format!("{kind}: confusion (rows true)"), &report.confusion, names),
    )?;

    let sibling = model_path.with_file_name(format!("trace_{kind}.csv"));
    let trace = trace.map(Path::to_path_buf).or_else(|| sibling.exists().then_some(sibling));
    if let Some(t) = trace {
        let losses = read_losses(&t)?;
        let pts: Vec<(f64, f64)> = losses.iter().enumerate().map(|(e, &l)| (e as f64, l)).collect();
        let s = [Series {
            name: "training loss",
            points: &pts,
        }];
        write(
            &out.join("loss.svg"),
            &svg::line_chart(&format!("{kind}: training loss"), "epoch", "cross-entropy", &s, None),
        )?;
    }
    Ok(report)
}

pub struct BenchmarkRow {
    pub model: ModelKind,
    pub report: EvalReport,
    pub seconds: f64,
}

pub struct BenchmarkTable {
    pub fingerprint: String,
    pub seed: u64,
    pub test_samples: usize,
    pub rows: Vec<BenchmarkRow>,
}

struct OptFixed(Option<f64>);

impl Serialize for OptFixed {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.0.map(Fixed6).serialize(s)
    }
}

impl Serialize for BenchmarkRow {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let r = &self.report;
        let mut st = s.serialize_struct("BenchmarkRow", 10)?;
        st.serialize_field("model", &self.model)?;
        st.serialize_field("accuracy", &Fixed6(r.accuracy))?;
        st.serialize_field("f1", &Fixed6(r.f1_macro))?;
        st.serialize_field("precision", &Fixed6(r.precision_macro))?;
        st.serialize_field("recall", &Fixed6(r.recall_macro))?;
        st.serialize_field("log_loss", &Fixed6(r.log_loss))?;
        st.serialize_field("auc_roc_mean", &OptFixed(r.mean_auc_roc()))?;
        st.serialize_field("auc_pr_mean", &OptFixed(r.mean_auc_pr()))?;
        st.serialize_field(
            "auc_roc_per_class",
            &r.per_class.iter().map(|c| OptFixed(c.auc_roc)).collect::<Vec<_>>(),
        )?;
        st.serialize_field("report", r)?;
        st.end()
    }
}

impl Serialize for BenchmarkTable {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("BenchmarkTable", 4)?;
        st.serialize_field("config_fingerprint", &self.fingerprint)?;
        st.serialize_field("seed", &self.seed)?;
        st.serialize_field("test_samples", &self.test_samples)?;
        st.serialize_field("models", &self.rows)?;
        st.end()
    }
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_owned(), |x| format!("{x:.3}"))
}

impl BenchmarkTable {
    pub fn row(&self, kind: ModelKind) -> Option<&BenchmarkRow> {
        self.rows.iter().find(|r| r.model == kind)
    }

    /// Aligned plain-text table; wall-clock times are left out so reruns
    /// compare byte for byte.
    pub fn to_text(&self) -> String {
        let head = ["Model", "Accuracy", "F1", "Precision", "Recall", "Log-Loss", "AUC-ROC", "AUC-PR"];
        let mut rows = vec![head.map(str::to_owned).to_vec()];
        for r in &self.rows {
            let e = &r.report;
            rows.push(vec![
                r.model.to_string(),
                cell(Some(e.accuracy)),
                cell(Some(e.f1_macro)),
                cell(Some(e.precision_macro)),
                cell(Some(e.recall_macro)),
                cell(Some(e.log_loss)),
                cell(e.mean_auc_roc()),
                cell(e.mean_auc_pr()),
            ]);
        }
        let widths: Vec<usize> = (0..head.len())
            .map(|c| rows.iter().map(|r| r[c].len()).max().unwrap())
            .collect();
        let mut out = String::new();
        for (k, r) in rows.iter().enumerate() {
            let line: Vec<String> = r
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(c, (v, w))| if c == 0 { format!("{v:<w$}") } else { format!("{v:>w$}") })
                .collect();
            let _ = writeln!(out, "{}", line.join("  ").trim_end());
            if k == 0 {
                let _ = writeln!(out, "{}", "-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1)));
            }
        }
        let _ = writeln!(out, "\nseed {}, {} test samples, config {}", self.seed, self.test_samples, self.fingerprint);
        out
    }
}

fn train_and_score(kind: ModelKind, ds: &SpatialDataset, settings: &ModelSettings) -> Result<BenchmarkRow, CliError> {
    let start = Instant::now();
    let (saved, _) = train_model(kind, ds, settings)?;
    let probs = predict_dataset(&saved, ds)?;
    let test = &ds.splits.test;
    let report = score(&probs.select_rows(test), &ds.labels_at(test), ds.classes)?;
    Ok(BenchmarkRow {
        model: kind,
        report,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// The three models share only immutable inputs, so they train concurrently.
fn train_all(ds: &SpatialDataset, settings: &ModelSettings) -> Result<Vec<BenchmarkRow>, CliError> {
    #[cfg(feature = "parallel")]
    let (g, (n, c)) = rayon::join(
        || train_and_score(ModelKind::Geoggnn, ds, settings),
        || {
            rayon::join(
                || train_and_score(ModelKind::Nn, ds, settings),
                || train_and_score(ModelKind::Cnn, ds, settings),
            )
        },
    );
    #[cfg(not(feature = "parallel"))]
    let (g, n, c) = (
        train_and_score(ModelKind::Geoggnn, ds, settings),
        train_and_score(ModelKind::Nn, ds, settings),
        train_and_score(ModelKind::Cnn, ds, settings),
    );
    Ok(vec![g?, n?, c?])
}

/// Generates the dataset, trains all three models with the shared seed and
/// epoch budgets and scores them on the test split.
pub fn benchmark(cfg: &RunConfig) -> Result<BenchmarkTable, CliError> {
    let gen = cfg.gen_config();
    let ds = datagen::generate(&gen)?;
    let rows = train_all(&ds, &cfg.model_settings())?;
    let table = BenchmarkTable {
        fingerprint: cfg.fingerprint(),
        seed: cfg.seed,
        test_samples: ds.splits.test.len(),
        rows,
    };
    ensure_dir(&cfg.out)?;
    write_dataset(&ds, &gen, &cfg.out.join("dataset.csv"))?;
    write(&cfg.out.join("benchmark.json"), &to_json(&table))?;
    write(&cfg.out.join("benchmark.txt"), &table.to_text())?;
    let timings: serde_json::Map<String, serde_json::Value> = table
        .rows
        .iter()
        .map(|r| (r.model.to_string(), r.seconds.into()))
        .collect();
    write(&cfg.out.join("timings.json"), &to_json(&timings))?;
    Ok(table)
}

#[derive(Serialize)]
struct SummaryFile<'a> {
    #[serde(flatten)]
    summary: &'a Summary,
    #[serde(skip_serializing_if = "Option::is_none")]
    note: Option<&'static str>,
}

pub fn smoothlab(cfg: &RunConfig) -> Result<Summary, CliError> {
    let exp = run_experiment(&cfg.experiment_config())?;
    ensure_dir(&cfg.out)?;
    write(&cfg.out.join("smoothlab.csv"), &exp.to_csv())?;
    let note = exp.summary.noiseless.then_some(
        "noise_std is 0, so the raw estimate equals the true field and smoothing cannot lower the error",
    );
    write(
        &cfg.out.join("smoothlab_summary.json"),
        &to_json(&SummaryFile {
            summary: &exp.summary,
            note,
        }),
    )?;
    Ok(exp.summary)
}
