//! Geographic graph construction: planar distances on raw degree
//! coordinates, threshold or Gaussian-kernel adjacency, self-loops and the
//! symmetric normalization `D^-1/2 (A + I) D^-1/2` used for propagation.

use serde::{Deserialize, Serialize};

use crate::error::{arg_err, shape_err, Error, Result};
use crate::par;
use crate::tensor::Matrix;

/// Latitude/longitude in decimal degrees.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self> {
        let p = Self { lat, lon };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(-90.0..=90.0).contains(&self.lat) || !(-180.0..=180.0).contains(&self.lon) {
            return Err(Error::Validation(format!(
                "coordinate ({}, {}) outside lat [-90, 90] / lon [-180, 180]",
                self.lat, self.lon
            )));
        }
        Ok(())
    }
}

/// Planar Euclidean distance in degrees. No geodesic correction.
pub fn euclid_distance(p: &GeoPoint, q: &GeoPoint) -> f64 {
    (p.lat - q.lat).hypot(p.lon - q.lon)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelMode {
    Threshold,
    Gaussian,
}

/// What pairwise distances are measured over.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceSource {
    /// Latitude/longitude of each node.
    #[default]
    Coordinates,
    /// Standardized node feature vectors.
    Features,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    pub mode: KernelMode,
    /// Edge threshold (degrees) in threshold mode.
    pub lambda: f64,
    /// Gaussian bandwidth (degrees) in gaussian mode.
    pub phi: f64,
    #[serde(default)]
    pub distance_source: DistanceSource,
    /// Gaussian weights below this are stored as exact zeros.
    #[serde(default = "default_floor")]
    pub weight_floor: f64,
}

fn default_floor() -> f64 {
    1e-12
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self {
            mode: KernelMode::Gaussian,
            lambda: 0.5,
            phi: 0.25,
            distance_source: DistanceSource::Coordinates,
            weight_floor: default_floor(),
        }
    }
}

impl KernelConfig {
    pub fn validate(&self) -> Result<()> {
        match self.mode {
            KernelMode::Threshold if !(self.lambda > 0.0 && self.lambda.is_finite()) => {
                arg_err(format!("threshold mode needs lambda > 0, got {}", self.lambda))
            }
            KernelMode::Gaussian if !(self.phi > 0.0 && self.phi.is_finite()) => {
                arg_err(format!("gaussian mode needs phi > 0, got {}", self.phi))
            }
            _ if !(self.weight_floor >= 0.0) => {
                arg_err(format!("weight_floor must be >= 0, got {}", self.weight_floor))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GraphWarning {
    /// Threshold graph without a single edge; propagation degenerates to
    /// the identity.
    NoEdges,
}

#[derive(Clone, Debug)]
pub struct WeightedGraph {
    pub n: usize,
    /// `A`: symmetric, zero diagonal, entries in `[0, 1]`.
    pub adj: Matrix,
    /// `A + I`.
    pub adj_self: Matrix,
    /// `D^-1/2 (A + I) D^-1/2`.
    pub norm: Matrix,
    /// Row sums of `A + I`.
    pub degrees: Vec<f64>,
    pub warnings: Vec<GraphWarning>,
}

/// Symmetric pairwise matrix with zero diagonal, `weight(i, j)` above it.
fn pairwise(n: usize, weight: impl Fn(usize, usize) -> f64 + Sync + Send) -> Matrix {
    let mut m = Matrix::zeros(n, n);
    par::for_each_row(m.data_mut(), n, n * n * 4, |i, row| {
        for (j, v) in row.iter_mut().enumerate() {
            if i != j {
                // Evaluate on the ordered pair so both triangles are bitwise equal.
                let (a, b) = if i < j { (i, j) } else { (j, i) };
                *v = weight(a, b);
            }
        }
    });
    m
}

fn row_distance(rows: &Matrix, i: usize, j: usize) -> f64 {
    rows.row(i)
        .iter()
        .zip(rows.row(j))
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

fn points_as_rows(points: &[GeoPoint]) -> Matrix {
    let data = points.iter().flat_map(|p| [p.lat, p.lon]).collect();
    Matrix::from_vec(points.len(), 2, data).expect("two columns per point")
}

fn need_two(n: usize) -> Result<()> {
    if n < 2 {
        return arg_err(format!("adjacency needs at least 2 nodes, got {n}"));
    }
    Ok(())
}

/// Binary adjacency: an edge wherever `d(i, j) < lambda` (strict).
pub fn build_threshold_adjacency(
    points: &[GeoPoint],
    lambda: f64,
) -> Result<(Matrix, Option<GraphWarning>)> {
    threshold_from_rows(&points_as_rows(points), lambda)
}

fn threshold_from_rows(rows: &Matrix, lambda: f64) -> Result<(Matrix, Option<GraphWarning>)> {
    need_two(rows.rows())?;
    if !(lambda > 0.0) {
        return arg_err(format!("lambda must be > 0, got {lambda}"));
    }
    let adj = pairwise(rows.rows(), |i, j| {
        if row_distance(rows, i, j) < lambda {
            1.0
        } else {
            0.0
        }
    });
    let warning = adj.data().iter().all(|&v| v == 0.0).then_some(GraphWarning::NoEdges);
    Ok((adj, warning))
}

/// Dense Gaussian-kernel adjacency `exp(-d^2 / (2 phi^2))` off the diagonal.
pub fn build_gaussian_adjacency(points: &[GeoPoint], phi: f64) -> Result<Matrix> {
    gaussian_from_rows(&points_as_rows(points), phi, 0.0)
}

fn gaussian_from_rows(rows: &Matrix, phi: f64, floor: f64) -> Result<Matrix> {
    need_two(rows.rows())?;
    if !(phi > 0.0) {
        return arg_err(format!("phi must be > 0, got {phi}"));
    }
    let denom = 2.0 * phi * phi;
    Ok(pairwise(rows.rows(), |i, j| {
        let d = row_distance(rows, i, j);
        let w = (-(d * d) / denom).exp();
        if w < floor {
            0.0
        } else {
            w
        }
    }))
}

/// `A + I`. Rejects inputs that already carry self-loops.
pub fn add_self_loops(adj: &Matrix) -> Result<Matrix> {
    let (n, m) = adj.shape();
    if n != m {
        return shape_err(format!("adjacency must be square, got {n}x{m}"));
    }
    if let Some(i) = (0..n).find(|&i| adj.get(i, i) != 0.0) {
        return arg_err(format!(
            "adjacency already has a self-loop at node {i} (diagonal {})",
            adj.get(i, i)
        ));
    }
    let mut out = adj.clone();
    for i in 0..n {
        out.set(i, i, 1.0);
    }
    Ok(out)
}

/// Returns `D^-1/2 Ã D^-1/2` and the degree vector of `Ã`.
pub fn sym_normalize(adj_self: &Matrix) -> Result<(Matrix, Vec<f64>)> {
    let (n, m) = adj_self.shape();
    if n != m {
        return shape_err(format!("adjacency must be square, got {n}x{m}"));
    }
    if adj_self.data().iter().any(|&v| v < 0.0 || !v.is_finite()) {
        return arg_err("adjacency entries must be finite and nonnegative");
    }
    let degrees: Vec<f64> = (0..n).map(|i| adj_self.row(i).iter().sum()).collect();
    if let Some(i) = degrees.iter().position(|&d| d <= 0.0) {
        return arg_err(format!("node {i} has zero degree and cannot be normalized"));
    }
    let inv_sqrt: Vec<f64> = degrees.iter().map(|d| 1.0 / d.sqrt()).collect();
    let mut norm = adj_self.clone();
    for i in 0..n {
        for (j, v) in norm.row_mut(i).iter_mut().enumerate() {
            *v *= inv_sqrt[i] * inv_sqrt[j];
        }
    }
    Ok((norm, degrees))
}

fn assemble(adj: Matrix, warnings: Vec<GraphWarning>) -> Result<WeightedGraph> {
    let adj_self = add_self_loops(&adj)?;
    let (norm, degrees) = sym_normalize(&adj_self)?;
    Ok(WeightedGraph {
        n: adj.rows(),
        adj,
        adj_self,
        norm,
        degrees,
        warnings,
    })
}

/// Builds the full propagation graph over coordinates.
pub fn build_graph(points: &[GeoPoint], config: &KernelConfig) -> Result<WeightedGraph> {
    for p in points {
        p.validate()?;
    }
    build_graph_from_rows(&points_as_rows(points), config)
}

/// Builds the graph from arbitrary row vectors (coordinates or features).
pub fn build_graph_from_rows(rows: &Matrix, config: &KernelConfig) -> Result<WeightedGraph> {
    config.validate()?;
    let n = rows.rows();
    if n == 0 {
        return arg_err("graph needs at least one node");
    }
    if n == 1 {
        return assemble(Matrix::zeros(1, 1), Vec::new());
    }
    match config.mode {
        KernelMode::Threshold => {
            let (adj, warning) = threshold_from_rows(rows, config.lambda)?;
            assemble(adj, warning.into_iter().collect())
        }
        KernelMode::Gaussian => {
            let adj = gaussian_from_rows(rows, config.phi, config.weight_floor)?;
            assemble(adj, Vec::new())
        }
    }
}

/// Builds a graph for a dataset honoring `config.distance_source`.
pub fn build_dataset_graph(
    points: &[GeoPoint],
    standardized_features: &Matrix,
    config: &KernelConfig,
) -> Result<WeightedGraph> {
    match config.distance_source {
        DistanceSource::Coordinates => build_graph(points, config),
        DistanceSource::Features => build_graph_from_rows(standardized_features, config),
    }
}
