//! Classification metrics: accuracy, macro precision/recall/F1, log-loss,
//! confusion matrix and one-vs-rest ROC and precision-recall curves.
//!
//! ROC area uses the trapezoid rule; PR area uses the right-continuous step
//! rule (average precision). Equal scores form a single threshold.

use serde::ser::{SerializeStruct, Serializer};
use serde::Serialize;

use crate::error::{arg_err, shape_err, Error, Result};
use crate::tensor::Matrix;

/// `confusion[i][j]` counts samples of true class `i` predicted as `j`.
pub type Confusion = Vec<Vec<u64>>;

fn check_pair(pred: &[usize], truth: &[usize]) -> Result<()> {
    if pred.is_empty() {
        return arg_err("metrics need at least one sample");
    }
    if pred.len() != truth.len() {
        return shape_err(format!(
            "{} predictions for {} labels",
            pred.len(),
            truth.len()
        ));
    }
    Ok(())
}

pub fn confusion_matrix(pred: &[usize], truth: &[usize], classes: usize) -> Result<Confusion> {
    check_pair(pred, truth)?;
    let mut m = vec![vec![0u64; classes]; classes];
    for (i, (&p, &t)) in pred.iter().zip(truth).enumerate() {
        if p >= classes || t >= classes {
            return arg_err(format!(
                "sample {i}: label pair ({t}, {p}) outside 0..{classes}"
            ));
        }
        m[t][p] += 1;
    }
    Ok(m)
}

pub fn accuracy(pred: &[usize], truth: &[usize]) -> Result<f64> {
    check_pair(pred, truth)?;
    let hits = pred.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / pred.len() as f64)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// No predictions of this class, so precision was set to 0.
    pub precision_undefined: bool,
    /// No samples of this class, so recall was set to 0.
    pub recall_undefined: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MacroScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub per_class: Vec<ClassScores>,
}

fn ratio(num: u64, den: u64) -> (f64, bool) {
    if den == 0 {
        (0.0, true)
    } else {
        (num as f64 / den as f64, false)
    }
}

fn scores_from_confusion(m: &Confusion) -> MacroScores {
    let c = m.len();
    let per_class: Vec<ClassScores> = (0..c)
        .map(|k| {
            let tp = m[k][k];
            let predicted: u64 = (0..c).map(|i| m[i][k]).sum();
            let actual: u64 = m[k].iter().sum();
            let (precision, precision_undefined) = ratio(tp, predicted);
            let (recall, recall_undefined) = ratio(tp, actual);
            let f1 = if precision + recall > 0.0 {
                2.0 * precision * recall / (precision + recall)
            } else {
                0.0
            };
            ClassScores {
                precision,
                recall,
                f1,
                precision_undefined,
                recall_undefined,
            }
        })
        .collect();
    let mean = |f: fn(&ClassScores) -> f64| per_class.iter().map(f).sum::<f64>() / c as f64;
    MacroScores {
        precision: mean(|s| s.precision),
        recall: mean(|s| s.recall),
        f1: mean(|s| s.f1),
        per_class,
    }
}

/// Unweighted class means of one-vs-rest precision, recall and F1. Classes
/// with a zero denominator contribute 0.
pub fn precision_recall_f1_macro(pred: &[usize], truth: &[usize], classes: usize) -> Result<MacroScores> {
    Ok(scores_from_confusion(&confusion_matrix(pred, truth, classes)?))
}

fn check_rows_sum_to_one(probabilities: &Matrix) -> Result<()> {
    for r in 0..probabilities.rows() {
        let s: f64 = probabilities.row(r).iter().sum();
        if (s - 1.0).abs() > 1e-6 || probabilities.row(r).iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation(format!(
                "probability row {r} sums to {s}, not 1"
            )));
        }
    }
    Ok(())
}

/// Mean `-ln P(true class)` with the same floor as the training loss.
pub fn log_loss(probabilities: &Matrix, truth: &[usize]) -> Result<f64> {
    if truth.is_empty() {
        return arg_err("log-loss needs at least one sample");
    }
    if truth.len() != probabilities.rows() {
        return shape_err(format!(
            "{} labels for {} probability rows",
            truth.len(),
            probabilities.rows()
        ));
    }
    check_rows_sum_to_one(probabilities)?;
    let all: Vec<usize> = (0..truth.len()).collect();
    crate::training::cross_entropy(probabilities, truth, &all)
}

/// A threshold curve. `points[0]` is the start anchor; every later point
/// corresponds to `thresholds[k - 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Curve {
    pub points: Vec<(f64, f64)>,
    pub thresholds: Vec<f64>,
    pub auc: f64,
}

/// Cumulative `(tp, fp, threshold)` after each group of equal scores,
/// scanning from the highest score down.
fn sweep(scores: &[f64], positives: &[bool]) -> Result<Vec<(u64, u64, f64)>> {
    if scores.len() != positives.len() {
        return shape_err(format!(
            "{} scores for {} labels",
            scores.len(),
            positives.len()
        ));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return arg_err("scores contain NaN");
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut steps = Vec::new();
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut k = 0;
    while k < order.len() {
        let s = scores[order[k]];
        while k < order.len() && scores[order[k]] == s {
            if positives[order[k]] {
                tp += 1;
            } else {
                fp += 1;
            }
            k += 1;
        }
        steps.push((tp, fp, s));
    }
    Ok(steps)
}

pub fn roc_curve_auc(scores: &[f64], positives: &[bool]) -> Result<Curve> {
    let p = positives.iter().filter(|&&b| b).count() as f64;
    let n = positives.len() as f64 - p;
    if p == 0.0 || n == 0.0 {
        return arg_err(format!(
            "ROC needs both classes present (got {p} positives, {n} negatives)"
        ));
    }
    let steps = sweep(scores, positives)?;
    let mut points = vec![(0.0, 0.0)];
    let mut thresholds = Vec::with_capacity(steps.len());
    let mut auc = 0.0;
    for &(tp, fp, s) in &steps {
        let (x0, y0) = *points.last().unwrap();
        let (x1, y1) = (fp as f64 / n, tp as f64 / p);
        auc += (x1 - x0) * (y0 + y1) / 2.0;
        points.push((x1, y1));
        thresholds.push(s);
    }
    Ok(Curve {
        points,
        thresholds,
        auc,
    })
}

pub fn pr_curve_auc(scores: &[f64], positives: &[bool]) -> Result<Curve> {
    let p = positives.iter().filter(|&&b| b).count() as f64;
    if p == 0.0 {
        return arg_err("precision-recall curve needs at least one positive");
    }
    let steps = sweep(scores, positives)?;
    let mut points = Vec::with_capacity(steps.len() + 1);
    let mut thresholds = Vec::with_capacity(steps.len());
    let mut auc = 0.0;
    let mut last_recall = 0.0;
    for &(tp, fp, s) in &steps {
        let recall = tp as f64 / p;
        let precision = tp as f64 / (tp + fp) as f64;
        if points.is_empty() {
            points.push((0.0, precision));
        }
        auc += (recall - last_recall) * precision;
        last_recall = recall;
        points.push((recall, precision));
        thresholds.push(s);
    }
    Ok(Curve {
        points,
        thresholds,
        auc,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassCurves {
    pub auc_roc: Option<f64>,
    pub auc_pr: Option<f64>,
    pub roc: Option<Curve>,
    pub pr: Option<Curve>,
    pub precision_undefined: bool,
    pub recall_undefined: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub samples: usize,
    pub accuracy: f64,
    pub f1_macro: f64,
    pub precision_macro: f64,
    pub recall_macro: f64,
    pub log_loss: f64,
    pub confusion: Confusion,
    pub per_class: Vec<ClassCurves>,
}

/// Scores a probability matrix against true labels. One-vs-rest curves use
/// column `c` as the score for class `c`; a class missing from `truth` (or
/// covering all of it) gets no ROC, and one missing gets no PR curve.
pub fn evaluate(probabilities: &Matrix, truth: &[usize], classes: usize) -> Result<EvalReport> {
    if probabilities.cols() != classes {
        return shape_err(format!(
            "{} probability columns for {classes} classes",
            probabilities.cols()
        ));
    }
    let loss = log_loss(probabilities, truth)?;
    let pred = probabilities.argmax_rows();
    let confusion = confusion_matrix(&pred, truth, classes)?;
    let macro_scores = scores_from_confusion(&confusion);
    let per_class = (0..classes)
        .map(|c| {
            let scores = probabilities.column(c);
            let positives: Vec<bool> = truth.iter().map(|&t| t == c).collect();
            let roc = roc_curve_auc(&scores, &positives).ok();
            let pr = pr_curve_auc(&scores, &positives).ok();
            let s = &macro_scores.per_class[c];
            ClassCurves {
                auc_roc: roc.as_ref().map(|r| r.auc),
                auc_pr: pr.as_ref().map(|r| r.auc),
                roc,
                pr,
                precision_undefined: s.precision_undefined,
                recall_undefined: s.recall_undefined,
            }
        })
        .collect();
    Ok(EvalReport {
        samples: truth.len(),
        accuracy: accuracy(&pred, truth)?,
        f1_macro: macro_scores.f1,
        precision_macro: macro_scores.precision,
        recall_macro: macro_scores.recall,
        log_loss: loss,
        confusion,
        per_class,
    })
}

/// A real printed with exactly six decimals in JSON output; non-finite
/// values become `null`.
pub struct Fixed6(pub f64);

impl Serialize for Fixed6 {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let text = if self.0.is_finite() {
            format!("{:.6}", self.0)
        } else {
            "null".to_owned()
        };
        serde_json::value::RawValue::from_string(text)
            .map_err(serde::ser::Error::custom)?
            .serialize(s)
    }
}

struct Points<'a>(&'a [(f64, f64)]);

impl Serialize for Points<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(self.0.iter().map(|&(a, b)| [Fixed6(a), Fixed6(b)]))
    }
}

impl Serialize for ClassCurves {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("ClassCurves", 6)?;
        st.serialize_field("auc_roc", &self.auc_roc.map(Fixed6))?;
        st.serialize_field("auc_pr", &self.auc_pr.map(Fixed6))?;
        st.serialize_field("precision_undefined", &self.precision_undefined)?;
        st.serialize_field("recall_undefined", &self.recall_undefined)?;
        let empty: &[(f64, f64)] = &[];
        st.serialize_field(
            "roc_points",
            &Points(self.roc.as_ref().map_or(empty, |c| &c.points)),
        )?;
        st.serialize_field(
            "pr_points",
            &Points(self.pr.as_ref().map_or(empty, |c| &c.points)),
        )?;
        st.end()
    }
}

impl Serialize for EvalReport {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("EvalReport", 8)?;
        st.serialize_field("samples", &self.samples)?;
        st.serialize_field("accuracy", &Fixed6(self.accuracy))?;
        st.serialize_field("f1_macro", &Fixed6(self.f1_macro))?;
        st.serialize_field("precision_macro", &Fixed6(self.precision_macro))?;
        st.serialize_field("recall_macro", &Fixed6(self.recall_macro))?;
        st.serialize_field("log_loss", &Fixed6(self.log_loss))?;
        st.serialize_field("confusion", &self.confusion)?;
        st.serialize_field("per_class", &self.per_class)?;
        st.end()
    }
}

impl EvalReport {
    /// Mean one-vs-rest ROC area over the classes where it is defined.
    pub fn mean_auc_roc(&self) -> Option<f64> {
        mean_defined(self.per_class.iter().map(|c| c.auc_roc))
    }

    pub fn mean_auc_pr(&self) -> Option<f64> {
        mean_defined(self.per_class.iter().map(|c| c.auc_pr))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn mean_defined(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.flatten().collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn fmt_threshold(t: Option<f64>) -> String {
    match t {
        Some(v) => format!("{v:.17e}"),
        None => "inf".to_owned(),
    }
}

impl Curve {
    /// One row per point; the anchor row carries threshold `inf`.
    pub fn to_csv(&self, x_name: &str, y_name: &str) -> String {
        let mut out = format!("threshold,{x_name},{y_name}\n");
        for (k, (x, y)) in self.points.iter().enumerate() {
            let t = k.checked_sub(1).map(|i| self.thresholds[i]);
            out.push_str(&format!("{},{x:.17e},{y:.17e}\n", fmt_threshold(t)));
        }
        out
    }
}
