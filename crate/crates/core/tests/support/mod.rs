//! Independent oracles shared by the integration tests and the acceptance
//! suite. Nothing here calls into the code under test except to obtain the
//! value being checked.

#![allow(dead_code)]

use geogwl::baselines::{
    cnn_gradients, mlp_gradients, Classifier, CnnConfig, CnnModel, MlpConfig, MlpModel,
};
use geogwl::geoggnn::{self, GcnConfig, GcnModel};
use geogwl::geograph::{build_graph, GeoPoint, KernelConfig, WeightedGraph};
use geogwl::tensor::{Matrix, Rng};
use geogwl::training::cross_entropy;

pub const FD_STEP: f64 = 1e-5;
/// Instances with a ReLU input this close to zero are redrawn, since a
/// finite difference straddling the kink measures neither one-sided slope.
pub const KINK_MARGIN: f64 = 1e-3;

/// `||a - n|| / (||a|| + ||n||)` per parameter tensor, worst over tensors.
pub fn relative_error(analytic: &[Vec<f64>], numeric: &[Vec<f64>]) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| {
            let diff = a.iter().zip(n).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
            let norm = a.iter().map(|x| x * x).sum::<f64>().sqrt() + n.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm < 1e-300 {
                0.0
            } else {
                diff / norm
            }
        })
        .fold(0.0, f64::max)
}

/// Central differences of `loss` over every entry of every tensor in `params`.
pub fn numeric_gradient<M: Clone>(
    model: &M,
    params: fn(&mut M) -> Vec<&mut [f64]>,
    loss: &dyn Fn(&M) -> f64,
) -> Vec<Vec<f64>> {
    let mut probe = model.clone();
    let sizes: Vec<usize> = params(&mut probe).iter().map(|p| p.len()).collect();
    let mut out = Vec::with_capacity(sizes.len());
    for (t, &len) in sizes.iter().enumerate() {
        let mut g = vec![0.0; len];
        for (k, gk) in g.iter_mut().enumerate() {
            let orig = params(&mut probe)[t][k];
            params(&mut probe)[t][k] = orig + FD_STEP;
            let up = loss(&probe);
            params(&mut probe)[t][k] = orig - FD_STEP;
            let down = loss(&probe);
            params(&mut probe)[t][k] = orig;
            *gk = (up - down) / (2.0 * FD_STEP);
        }
        out.push(g);
    }
    out
}

fn near_kink(pre: &Matrix) -> bool {
    pre.data().iter().any(|z| z.abs() < KINK_MARGIN)
}

fn random_matrix(rng: &mut Rng, rows: usize, cols: usize) -> Matrix {
    let data = (0..rows * cols).map(|_| rng.normal(0.0, 1.0)).collect();
    Matrix::from_vec(rows, cols, data).unwrap()
}

fn random_labels(rng: &mut Rng, n: usize, c: usize) -> Vec<usize> {
    (0..n).map(|_| rng.index(c)).collect()
}

/// A non-empty random subset of `0..n`.
fn random_mask(rng: &mut Rng, n: usize) -> Vec<usize> {
    loop {
        let m: Vec<usize> = (0..n).filter(|_| rng.unit() < 0.6).collect();
        if !m.is_empty() {
            return m;
        }
    }
}

fn gcn_params(m: &mut GcnModel) -> Vec<&mut [f64]> {
    m.weights.iter_mut().map(|w| w.data_mut()).collect()
}

fn mlp_params(m: &mut MlpModel) -> Vec<&mut [f64]> {
    m.params_mut()
}

fn cnn_params(m: &mut CnnModel) -> Vec<&mut [f64]> {
    m.params_mut()
}

pub struct GcnInstance {
    pub model: GcnModel,
    pub graph: WeightedGraph,
    pub x: Matrix,
    pub labels: Vec<usize>,
    pub mask: Vec<usize>,
}

pub fn gcn_instance(rng: &mut Rng) -> GcnInstance {
    loop {
        let n = 2 + rng.index(7);
        let f = 1 + rng.index(4);
        let h = 1 + rng.index(5);
        let c = 2 + rng.index(3);
        let dims = if rng.unit() < 0.5 { vec![f, h, c] } else { vec![f, h, h + 1, c] };
        let cfg = GcnConfig {
            layer_dims: dims,
            seed: rng.next_u64(),
            ..GcnConfig::default()
        };
        let model = geoggnn::init_model(&cfg, rng).unwrap();
        let points: Vec<GeoPoint> = (0..n)
            .map(|_| GeoPoint::new(rng.uniform(24.0, 26.0), rng.uniform(50.0, 52.0)).unwrap())
            .collect();
        let graph = build_graph(
            &points,
            &KernelConfig {
                phi: rng.uniform(0.2, 1.0),
                ..KernelConfig::default()
            },
        )
        .unwrap();
        let x = random_matrix(rng, n, f);
        let pass = geoggnn::forward(&model, &graph, &x).unwrap();
        let hidden_pre = &pass.pre_activations[..pass.pre_activations.len() - 1];
        if hidden_pre.iter().any(near_kink) {
            continue;
        }
        return GcnInstance {
            labels: random_labels(rng, n, c),
            mask: random_mask(rng, n),
            model,
            graph,
            x,
        };
    }
}

/// Worst relative error between analytic and numeric GCN gradients.
pub fn gcn_gradient_error(inst: &GcnInstance) -> f64 {
    let analytic: Vec<Vec<f64>> = geoggnn::backward(&inst.model, &inst.graph, &inst.x, &inst.labels, &inst.mask)
        .unwrap()
        .into_iter()
        .map(Matrix::into_data)
        .collect();
    let loss = |m: &GcnModel| {
        let p = geoggnn::forward(m, &inst.graph, &inst.x).unwrap().probabilities;
        cross_entropy(&p, &inst.labels, &inst.mask).unwrap()
    };
    relative_error(&analytic, &numeric_gradient(&inst.model, gcn_params, &loss))
}

/// Hidden-layer pre-activations of a dense stack, recomputed from its
/// public weights.
fn dense_pre(layers: &[geogwl::baselines::DenseLayer], x: &Matrix) -> Vec<Matrix> {
    let mut h = x.clone();
    let mut out = Vec::new();
    for l in &layers[..layers.len() - 1] {
        let mut z = Matrix::zeros(h.rows(), l.weight.cols());
        for r in 0..h.rows() {
            for c in 0..l.weight.cols() {
                let s: f64 = (0..h.cols()).map(|k| h.get(r, k) * l.weight.get(k, c)).sum();
                z.set(r, c, s + l.bias[c]);
            }
        }
        h = z.map(|v| v.max(0.0));
        out.push(z);
    }
    out
}

pub struct DenseInstance<M> {
    pub model: M,
    pub x: Matrix,
    pub labels: Vec<usize>,
    pub mask: Vec<usize>,
}

fn perturb_biases(rng: &mut Rng, layers: &mut [geogwl::baselines::DenseLayer]) {
    for l in layers {
        for b in &mut l.bias {
            *b = rng.normal(0.0, 0.3);
        }
    }
}

pub fn mlp_instance(rng: &mut Rng) -> DenseInstance<MlpModel> {
    loop {
        let n = 2 + rng.index(7);
        let f = 1 + rng.index(5);
        let c = 2 + rng.index(3);
        let mut dims = vec![f];
        for _ in 0..1 + rng.index(2) {
            dims.push(1 + rng.index(6));
        }
        dims.push(c);
        let mut model = MlpModel::init(&MlpConfig {
            layer_dims: dims,
            seed: rng.next_u64(),
            ..MlpConfig::default()
        })
        .unwrap();
        perturb_biases(rng, &mut model.layers);
        let x = random_matrix(rng, n, f);
        if dense_pre(&model.layers, &x).iter().any(near_kink) {
            continue;
        }
        return DenseInstance {
            labels: random_labels(rng, n, c),
            mask: random_mask(rng, n),
            model,
            x,
        };
    }
}

pub fn mlp_gradient_error(inst: &DenseInstance<MlpModel>) -> f64 {
    let analytic = mlp_gradients(&inst.model, &inst.x, &inst.labels, &inst.mask).unwrap();
    let loss = |m: &MlpModel| cross_entropy(&m.predict_proba(&inst.x).unwrap(), &inst.labels, &inst.mask).unwrap();
    relative_error(&analytic, &numeric_gradient(&inst.model, mlp_params, &loss))
}

/// Valid-mode convolution pre-activations, channel-major.
fn conv_pre(model: &CnnModel, x: &Matrix) -> Matrix {
    let (ch, k) = model.conv.kernels.shape();
    let t = x.cols() - k + 1;
    let mut z = Matrix::zeros(x.rows(), ch * t);
    for r in 0..x.rows() {
        for c in 0..ch {
            for s in 0..t {
                let v: f64 = (0..k).map(|j| model.conv.kernels.get(c, j) * x.get(r, s + j)).sum();
                z.set(r, c * t + s, v + model.conv.bias[c]);
            }
        }
    }
    z
}

pub fn cnn_instance(rng: &mut Rng) -> DenseInstance<CnnModel> {
    loop {
        let n = 2 + rng.index(6);
        let len = 3 + rng.index(5);
        let k = 1 + rng.index(3);
        let c = 2 + rng.index(3);
        let cfg = CnnConfig {
            input_len: len,
            kernel_size: k,
            channels: 1 + rng.index(3),
            dense_dims: vec![1 + rng.index(5), c],
            seed: rng.next_u64(),
            ..CnnConfig::default()
        };
        let mut model = CnnModel::init(&cfg).unwrap();
        for b in &mut model.conv.bias {
            *b = rng.normal(0.0, 0.3);
        }
        perturb_biases(rng, &mut model.dense);
        let x = random_matrix(rng, n, len);
        let z = conv_pre(&model, &x);
        if near_kink(&z) || dense_pre(&model.dense, &z.map(|v| v.max(0.0))).iter().any(near_kink) {
            continue;
        }
        return DenseInstance {
            labels: random_labels(rng, n, c),
            mask: random_mask(rng, n),
            model,
            x,
        };
    }
}

pub fn cnn_gradient_error(inst: &DenseInstance<CnnModel>) -> f64 {
    let analytic = cnn_gradients(&inst.model, &inst.x, &inst.labels, &inst.mask).unwrap();
    let loss = |m: &CnnModel| cross_entropy(&m.predict_proba(&inst.x).unwrap(), &inst.labels, &inst.mask).unwrap();
    relative_error(&analytic, &numeric_gradient(&inst.model, cnn_params, &loss))
}

/// Probability that a random positive outscores a random negative, ties
/// counting one half, by enumerating every pair.
pub fn mann_whitney_auc(scores: &[f64], positives: &[bool]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, &si) in scores.iter().enumerate() {
        if !positives[i] {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if positives[j] {
                continue;
            }
            pairs += 1.0;
            if si > sj {
                wins += 1.0;
            } else if si == sj {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

/// Random scores on a coarse lattice so ties are common, with both classes
/// present.
pub fn random_scored_instance(rng: &mut Rng) -> (Vec<f64>, Vec<bool>) {
    loop {
        let n = 2 + rng.index(49);
        let levels = 2 + rng.index(20);
        let scores: Vec<f64> = (0..n).map(|_| rng.index(levels) as f64 / levels as f64).collect();
        let pos: Vec<bool> = (0..n).map(|_| rng.unit() < 0.4).collect();
        if pos.iter().any(|&p| p) && pos.iter().any(|&p| !p) {
            return (scores, pos);
        }
    }
}

pub struct BruteScores {
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
    pub f1: Vec<f64>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
}

/// One-vs-rest counts tallied sample by sample for each class.
pub fn brute_force_prf(pred: &[usize], truth: &[usize], classes: usize) -> BruteScores {
    let (mut p, mut r, mut f) = (Vec::new(), Vec::new(), Vec::new());
    for k in 0..classes {
        let (mut tp, mut fp, mut fneg) = (0u64, 0u64, 0u64);
        for (&a, &b) in pred.iter().zip(truth) {
            match (a == k, b == k) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fneg += 1,
                _ => {}
            }
        }
        let prec = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
        let rec = if tp + fneg == 0 { 0.0 } else { tp as f64 / (tp + fneg) as f64 };
        let f1 = if prec + rec == 0.0 { 0.0 } else { 2.0 * prec * rec / (prec + rec) };
        p.push(prec);
        r.push(rec);
        f.push(f1);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / classes as f64;
    BruteScores {
        macro_precision: mean(&p),
        macro_recall: mean(&r),
        macro_f1: mean(&f),
        precision: p,
        recall: r,
        f1: f,
    }
}

pub fn random_predictions(rng: &mut Rng) -> (Vec<usize>, Vec<usize>, usize) {
    let c = 2 + rng.index(5);
    let n = 1 + rng.index(60);
    let truth: Vec<usize> = (0..n).map(|_| rng.index(c)).collect();
    let pred: Vec<usize> = truth
        .iter()
        .map(|&t| if rng.unit() < 0.5 { t } else { rng.index(c) })
        .collect();
    (pred, truth, c)
}
