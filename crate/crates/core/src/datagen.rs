//! Seeded synthetic geo-tagged incident data.
//!
//! Points are drawn from a Gaussian mixture over Gulf city centres. Each
//! class owns a smooth score field (a sum of spatial bumps); a point's
//! provisional class is the arg-max of the fields, calibrated so the classes
//! come out balanced, and its final class is the majority among itself and
//! its nearest spatial neighbours. Features carry a class prototype blended
//! with the prototypes of the spatial neighbours, buried in Gaussian noise,
//! so a single point's features are a weak cue while an average over its
//! neighbourhood is a strong one.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{arg_err, Error, Result};
use crate::geograph::{euclid_distance, GeoPoint};
use crate::par;
use crate::split::Splits;
use crate::tensor::{standardize_columns, Matrix, Rng};

pub const GENERATOR_VERSION: &str = "geogwl-synth/1";

/// Bounding box every generated coordinate is clipped into.
pub const LAT_RANGE: (f64, f64) = (15.0, 33.0);
pub const LON_RANGE: (f64, f64) = (34.0, 61.0);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Center {
    pub name: String,
    pub lat: f64,
    pub lon: f64,
    pub weight: f64,
}

fn center(name: &str, lat: f64, lon: f64) -> Center {
    Center {
        name: name.to_owned(),
        lat,
        lon,
        weight: 1.0,
    }
}

pub fn default_centers() -> Vec<Center> {
    vec![
        center("Riyadh", 24.7136, 46.6753),
        center("Dubai", 25.2048, 55.2708),
        center("Doha", 25.2854, 51.5310),
        center("Kuwait City", 29.3759, 47.9774),
        center("Muscat", 23.5880, 58.3829),
        center("Manama", 26.2285, 50.5860),
    ]
}

pub fn default_class_names(c: usize) -> Vec<String> {
    let base = ["phishing", "ransomware", "fraud", "botnet"];
    (0..c)
        .map(|k| base.get(k).map_or_else(|| format!("class{k}"), |s| (*s).to_owned()))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenConfig {
    pub seed: u64,
    pub n: usize,
    pub f: usize,
    pub c: usize,
    pub centers: Vec<Center>,
    /// Degrees.
    pub cluster_std: f64,
    /// Degrees; width of each bump in the class score fields.
    pub label_field_bandwidth: f64,
    pub feature_noise_std: f64,
    /// Train, validation, test.
    pub split_fractions: [f64; 3],
    /// Neighbours consulted by the majority relabelling and the feature blend.
    pub neighbors: usize,
    pub bumps_per_class: usize,
    /// Length of each class prototype vector.
    pub signal_strength: f64,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            n: 400,
            f: 6,
            c: 4,
            centers: default_centers(),
            cluster_std: 0.8,
            label_field_bandwidth: 1.2,
            feature_noise_std: 1.0,
            split_fractions: [0.6, 0.2, 0.2],
            neighbors: 5,
            bumps_per_class: 6,
            signal_strength: 1.5,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        if self.c < 2 {
            return arg_err(format!("need at least 2 classes, got {}", self.c));
        }
        if self.n < self.c {
            return arg_err(format!("n = {} cannot cover {} classes", self.n, self.c));
        }
        if self.f == 0 {
            return arg_err("need at least one feature");
        }
        if self.centers.is_empty() || self.centers.iter().any(|c| !(c.weight > 0.0)) {
            return arg_err("need at least one centre, all with positive weight");
        }
        for c in &self.centers {
            GeoPoint::new(c.lat, c.lon)?;
        }
        let s = &self.split_fractions;
        if s.iter().any(|&v| !(v > 0.0)) || (s.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return arg_err(format!(
                "split fractions must be positive and sum to 1, got {s:?}"
            ));
        }
        for (name, v) in [
            ("cluster_std", self.cluster_std),
            ("label_field_bandwidth", self.label_field_bandwidth),
        ] {
            if !(v > 0.0) {
                return arg_err(format!("{name} must be > 0, got {v}"));
            }
        }
        if !(self.feature_noise_std >= 0.0) || !(self.signal_strength >= 0.0) {
            return arg_err("noise and signal strengths must be >= 0");
        }
        if self.bumps_per_class == 0 {
            return arg_err("bumps_per_class must be positive");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub seed: u64,
    pub generator_version: String,
    pub class_names: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpatialDataset {
    pub features: Matrix,
    pub coords: Vec<GeoPoint>,
    pub labels: Vec<usize>,
    pub splits: Splits,
    pub classes: usize,
    pub meta: DatasetMeta,
}

impl SpatialDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.classes];
        for &y in &self.labels {
            counts[y] += 1;
        }
        counts
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.labels.len();
        if self.coords.len() != n || self.features.rows() != n {
            return Err(Error::Validation(format!(
                "{} labels, {} coordinates, {} feature rows",
                n,
                self.coords.len(),
                self.features.rows()
            )));
        }
        for (i, p) in self.coords.iter().enumerate() {
            p.validate()
                .map_err(|e| Error::Validation(format!("node {i}: {e}")))?;
        }
        if let Some(i) = self.labels.iter().position(|&y| y >= self.classes) {
            return Err(Error::Validation(format!(
                "node {i} has label {} outside 0..{}",
                self.labels[i], self.classes
            )));
        }
        if !self.features.is_finite() {
            return Err(Error::Validation("non-finite feature value".into()));
        }
        self.splits.validate(n, true)?;
        check_balance(&self.class_counts(), n)
    }

    /// Feature matrix standardized over all nodes.
    pub fn standardized_features(&self) -> Result<Matrix> {
        Ok(standardize_columns(&self.features)?.0)
    }

    pub fn labels_at(&self, idx: &[usize]) -> Vec<usize> {
        idx.iter().map(|&i| self.labels[i]).collect()
    }
}

/// Every class count within 10% of `n / c`.
fn check_balance(counts: &[usize], n: usize) -> Result<()> {
    let target = n as f64 / counts.len() as f64;
    for (k, &cnt) in counts.iter().enumerate() {
        if (cnt as f64 - target).abs() > 0.1 * target + 1e-9 {
            return Err(Error::Validation(format!(
                "class {k} has {cnt} samples, outside 10% of {target:.1}"
            )));
        }
    }
    Ok(())
}

/// Indices of the `k` nearest other points, nearest first (ties by index).
pub fn nearest_neighbors(coords: &[GeoPoint], k: usize) -> Vec<Vec<usize>> {
    let n = coords.len();
    let k = k.min(n.saturating_sub(1));
    par::map_range(n, |i| {
        let mut d: Vec<(f64, usize)> = (0..n)
            .filter(|&j| j != i)
            .map(|j| (euclid_distance(&coords[i], &coords[j]), j))
            .collect();
        d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        d.truncate(k);
        d.into_iter().map(|(_, j)| j).collect()
    })
}

fn sample_coords(config: &GenConfig, rng: &mut Rng) -> Vec<GeoPoint> {
    let total: f64 = config.centers.iter().map(|c| c.weight).sum();
    (0..config.n)
        .map(|_| {
            let mut u = rng.uniform(0.0, total);
            let mut pick = &config.centers[config.centers.len() - 1];
            for c in &config.centers {
                if u < c.weight {
                    pick = c;
                    break;
                }
                u -= c.weight;
            }
            let lat = rng.normal(pick.lat, config.cluster_std);
            let lon = rng.normal(pick.lon, config.cluster_std);
            GeoPoint {
                lat: lat.clamp(LAT_RANGE.0, LAT_RANGE.1),
                lon: lon.clamp(LON_RANGE.0, LON_RANGE.1),
            }
        })
        .collect()
}

/// `scores[i][c]`: value of class `c`'s bump field at point `i`.
fn class_fields(config: &GenConfig, coords: &[GeoPoint], rng: &mut Rng) -> Vec<Vec<f64>> {
    let mut bumps = Vec::with_capacity(config.c);
    for _ in 0..config.c {
        let centres = sample_coords(
            &GenConfig {
                n: config.bumps_per_class,
                ..config.clone()
            },
            rng,
        );
        let amps: Vec<f64> = (0..config.bumps_per_class)
            .map(|_| rng.uniform(0.5, 1.5))
            .collect();
        bumps.push((centres, amps));
    }
    let denom = 2.0 * config.label_field_bandwidth.powi(2);
    coords
        .iter()
        .map(|p| {
            bumps
                .iter()
                .map(|(centres, amps)| {
                    centres
                        .iter()
                        .zip(amps)
                        .map(|(q, a)| a * (-euclid_distance(p, q).powi(2) / denom).exp())
                        .sum()
                })
                .collect()
        })
        .collect()
}

fn capacities(n: usize, c: usize) -> Vec<usize> {
    (0..c).map(|k| n / c + usize::from(k < n % c)).collect()
}

/// Arg-max of `fields + offset`, with offsets tuned so class counts approach
/// their capacities, then an exact capacity-respecting assignment that
/// visits (point, class) pairs in order of decreasing shifted score.
fn balanced_argmax(fields: &[Vec<f64>], c: usize) -> Vec<usize> {
    let n = fields.len();
    let cap = capacities(n, c);
    let mut offset = vec![0.0; c];
    let spread = fields
        .iter()
        .flatten()
        .fold(0.0f64, |m, &v| m.max(v.abs()))
        .max(1e-12);
    for sweep in 0..60 {
        let step = spread * 0.5f64.powi(sweep / 6 + 1);
        let mut counts = vec![0usize; c];
        for row in fields {
            counts[argmax_shifted(row, &offset)] += 1;
        }
        if counts == cap {
            break;
        }
        for k in 0..c {
            if counts[k] > cap[k] {
                offset[k] -= step * (counts[k] - cap[k]) as f64 / n as f64;
            } else {
                offset[k] += step * (cap[k] - counts[k]) as f64 / n as f64;
            }
        }
    }
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(n * c);
    for (i, row) in fields.iter().enumerate() {
        for k in 0..c {
            pairs.push((row[k] + offset[k], i, k));
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut label = vec![usize::MAX; n];
    let mut left = cap;
    for (_, i, k) in pairs {
        if label[i] == usize::MAX && left[k] > 0 {
            label[i] = k;
            left[k] -= 1;
        }
    }
    label
}

fn argmax_shifted(row: &[f64], offset: &[f64]) -> usize {
    let mut best = 0;
    for k in 1..row.len() {
        if row[k] + offset[k] > row[best] + offset[best] {
            best = k;
        }
    }
    best
}

/// Majority vote over each point and its neighbours; a point keeps its own
/// label when that label is among the most frequent, otherwise the lowest
/// tied class wins.
fn majority_relabel(labels: &[usize], neighbors: &[Vec<usize>], c: usize) -> Vec<usize> {
    labels
        .iter()
        .enumerate()
        .map(|(i, &own)| {
            let mut votes = vec![0usize; c];
            votes[own] += 1;
            for &j in &neighbors[i] {
                votes[labels[j]] += 1;
            }
            let top = *votes.iter().max().unwrap();
            if votes[own] == top {
                own
            } else {
                votes.iter().position(|&v| v == top).unwrap()
            }
        })
        .collect()
}

fn prototypes(config: &GenConfig, rng: &mut Rng) -> Vec<Vec<f64>> {
    (0..config.c)
        .map(|_| {
            let v: Vec<f64> = (0..config.f).map(|_| rng.normal(0.0, 1.0)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
            v.into_iter().map(|x| x * config.signal_strength / norm).collect()
        })
        .collect()
}

fn synth_features(
    config: &GenConfig,
    labels: &[usize],
    neighbors: &[Vec<usize>],
    protos: &[Vec<f64>],
    rng: &mut Rng,
) -> Matrix {
    let mut x = Matrix::zeros(labels.len(), config.f);
    for (i, &y) in labels.iter().enumerate() {
        let nb = &neighbors[i];
        let row = x.row_mut(i);
        for (d, v) in row.iter_mut().enumerate() {
            let own = protos[y][d];
            let around = if nb.is_empty() {
                own
            } else {
                nb.iter().map(|&j| protos[labels[j]][d]).sum::<f64>() / nb.len() as f64
            };
            *v = 0.5 * own + 0.5 * around + rng.normal(0.0, config.feature_noise_std);
        }
    }
    x
}

/// Per-class shuffled split: `round(f_train * n_c)` train, `round(f_val *
/// n_c)` validation, the rest test.
fn stratified_split(labels: &[usize], c: usize, fractions: [f64; 3], rng: &mut Rng) -> Splits {
    let mut splits = Splits::default();
    for k in 0..c {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == k).collect();
        rng.shuffle(&mut members);
        let m = members.len();
        let n_train = ((fractions[0] * m as f64).round() as usize).min(m);
        let n_val = ((fractions[1] * m as f64).round() as usize).min(m - n_train);
        splits.train.extend(&members[..n_train]);
        splits.val.extend(&members[n_train..n_train + n_val]);
        splits.test.extend(&members[n_train + n_val..]);
    }
    splits.train.sort_unstable();
    splits.val.sort_unstable();
    splits.test.sort_unstable();
    splits
}

const MAX_ATTEMPTS: usize = 10;

/// Generates a dataset; the same config always yields the same dataset.
pub fn generate(config: &GenConfig) -> Result<SpatialDataset> {
    config.validate()?;
    let mut rng = Rng::new(config.seed);
    let mut last_err = None;
    for _ in 0..MAX_ATTEMPTS {
        let coords = sample_coords(config, &mut rng);
        let fields = class_fields(config, &coords, &mut rng);
        let provisional = balanced_argmax(&fields, config.c);
        let neighbors = nearest_neighbors(&coords, config.neighbors);
        let labels = majority_relabel(&provisional, &neighbors, config.c);
        let mut counts = vec![0; config.c];
        for &y in &labels {
            counts[y] += 1;
        }
        if let Err(e) = check_balance(&counts, config.n) {
            last_err = Some(e);
            continue;
        }
        let protos = prototypes(config, &mut rng);
        let features = synth_features(config, &labels, &neighbors, &protos, &mut rng);
        let splits = stratified_split(&labels, config.c, config.split_fractions, &mut rng);
        let ds = SpatialDataset {
            features,
            coords,
            labels,
            splits,
            classes: config.c,
            meta: DatasetMeta {
                seed: config.seed,
                generator_version: GENERATOR_VERSION.to_owned(),
                class_names: default_class_names(config.c),
            },
        };
        ds.validate()?;
        return Ok(ds);
    }
    Err(Error::Validation(format!(
        "could not balance classes in {MAX_ATTEMPTS} attempts ({}); try a larger n, \
         a wider label_field_bandwidth or fewer classes",
        last_err.map(|e| e.to_string()).unwrap_or_default()
    )))
}

fn split_name(splits: &Splits, n: usize) -> Vec<&'static str> {
    let mut names = vec![""; n];
    for (set, name) in [(&splits.train, "train"), (&splits.val, "val"), (&splits.test, "test")] {
        for &i in set {
            names[i] = name;
        }
    }
    names
}

/// CSV text with header `id,lat,lon,f0..f{F-1},label,split`. Reals carry
/// 17 significant digits so a load reproduces them exactly.
pub fn to_csv(ds: &SpatialDataset) -> String {
    let f = ds.features.cols();
    let mut out = String::from("id,lat,lon");
    for d in 0..f {
        let _ = write!(out, ",f{d}");
    }
    out.push_str(",label,split\n");
    let names = split_name(&ds.splits, ds.len());
    for (i, (p, name)) in ds.coords.iter().zip(&names).enumerate() {
        let _ = write!(out, "{i},{:.16e},{:.16e}", p.lat, p.lon);
        for v in ds.features.row(i) {
            let _ = write!(out, ",{v:.16e}");
        }
        let _ = writeln!(out, ",{},{name}", ds.labels[i]);
    }
    out
}

pub fn save(ds: &SpatialDataset, path: &Path) -> Result<()> {
    std::fs::write(path, to_csv(ds))?;
    Ok(())
}

fn row_err(line: usize, msg: impl std::fmt::Display) -> Error {
    Error::Validation(format!("row {line}: {msg}"))
}

/// Parses CSV text produced by [`to_csv`] and validates every invariant.
pub fn from_csv(text: &str, classes: usize, meta: DatasetMeta) -> Result<SpatialDataset> {
    let mut lines = text.lines();
    let header: Vec<&str> = lines
        .next()
        .ok_or_else(|| Error::Validation("empty dataset file".into()))?
        .split(',')
        .collect();
    let n_cols = header.len();
    if n_cols < 6
        || header[..3] != ["id", "lat", "lon"]
        || header[n_cols - 2..] != ["label", "split"]
    {
        return Err(Error::Validation(format!(
            "header must be id,lat,lon,f0..,label,split; got {}",
            header.join(",")
        )));
    }
    let f = n_cols - 5;
    for (d, h) in header[3..3 + f].iter().enumerate() {
        if *h != format!("f{d}") {
            return Err(Error::Validation(format!("feature column {d} is named {h}")));
        }
    }

    let mut coords = Vec::new();
    let mut labels = Vec::new();
    let mut data = Vec::new();
    let mut splits = Splits::default();
    for (k, line) in lines.enumerate() {
        let row = k + 2;
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != n_cols {
            return Err(row_err(row, format!("{} cells, expected {n_cols}", cells.len())));
        }
        let id: usize = cells[0].parse().map_err(|_| row_err(row, "bad id"))?;
        if id != labels.len() {
            return Err(row_err(row, format!("id {id} out of sequence")));
        }
        let num = |s: &str, what: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|_| row_err(row, format!("bad {what} value {s:?}")))
        };
        let p = GeoPoint {
            lat: num(cells[1], "lat")?,
            lon: num(cells[2], "lon")?,
        };
        p.validate().map_err(|e| row_err(row, e))?;
        coords.push(p);
        for d in 0..f {
            data.push(num(cells[3 + d], "feature")?);
        }
        let y: usize = cells[3 + f]
            .parse()
            .map_err(|_| row_err(row, format!("bad label {:?}", cells[3 + f])))?;
        if y >= classes {
            return Err(row_err(row, format!("label {y} outside 0..{classes}")));
        }
        labels.push(y);
        match cells[4 + f] {
            "train" => splits.train.push(id),
            "val" => splits.val.push(id),
            "test" => splits.test.push(id),
            other => return Err(row_err(row, format!("unknown split {other:?}"))),
        }
    }
    let ds = SpatialDataset {
        features: Matrix::from_vec(labels.len(), f, data)?,
        coords,
        labels,
        splits,
        classes,
        meta,
    };
    ds.validate()?;
    Ok(ds)
}

pub fn load(path: &Path, classes: usize, meta: DatasetMeta) -> Result<SpatialDataset> {
    from_csv(&std::fs::read_to_string(path)?, classes, meta)
}

/// Majority label among the `k` feature-space nearest training rows; ties go
/// to the lowest class index.
fn knn_accuracy(x: &Matrix, labels: &[usize], splits: &Splits, k: usize, classes: usize) -> f64 {
    if splits.test.is_empty() || splits.train.is_empty() {
        return 0.0;
    }
    let k = k.clamp(1, splits.train.len());
    let hits: Vec<bool> = par::map_range(splits.test.len(), |t| {
        let i = splits.test[t];
        let mut d: Vec<(f64, usize)> = splits
            .train
            .iter()
            .map(|&j| {
                let s: f64 = x.row(i).iter().zip(x.row(j)).map(|(a, b)| (a - b) * (a - b)).sum();
                (s, j)
            })
            .collect();
        d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut votes = vec![0usize; classes];
        for &(_, j) in &d[..k] {
            votes[labels[j]] += 1;
        }
        let top = *votes.iter().max().unwrap();
        votes.iter().position(|&v| v == top).unwrap() == labels[i]
    });
    hits.iter().filter(|&&h| h).count() as f64 / hits.len() as f64
}

/// Test accuracy of a k-NN classifier on spatially neighbour-averaged
/// features minus its accuracy on the raw features. Positive values mean
/// aggregating over geographic neighbours helps.
pub fn relational_gap_probe(ds: &SpatialDataset, k: usize) -> Result<f64> {
    if k == 0 {
        return arg_err("k must be at least 1");
    }
    let x = ds.standardized_features()?;
    let neighbors = nearest_neighbors(&ds.coords, k);
    let mut averaged = x.clone();
    for (i, nb) in neighbors.iter().enumerate() {
        let row = averaged.row_mut(i);
        for &j in nb {
            for (v, w) in row.iter_mut().zip(x.row(j)) {
                *v += w;
            }
        }
        let m = (nb.len() + 1) as f64;
        for v in row.iter_mut() {
            *v /= m;
        }
    }
    let with = knn_accuracy(&averaged, &ds.labels, &ds.splits, k, ds.classes);
    let without = knn_accuracy(&x, &ds.labels, &ds.splits, k, ds.classes);
    Ok(with - without)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_dataset_is_balanced() {
        let ds = generate(&GenConfig::default()).unwrap();
        assert_eq!(ds.len(), 400);
        for c in ds.class_counts() {
            assert!((90..=110).contains(&c), "count {c}");
        }
    }

    #[test]
    fn four_points_four_classes() {
        let ds = generate(&GenConfig {
            n: 4,
            ..GenConfig::default()
        })
        .unwrap();
        assert_eq!(ds.class_counts(), vec![1, 1, 1, 1]);
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = GenConfig {
            seed: 7,
            n: 120,
            ..GenConfig::default()
        };
        assert_eq!(to_csv(&generate(&cfg).unwrap()), to_csv(&generate(&cfg).unwrap()));
    }

    #[test]
    fn bad_configs_are_rejected() {
        let bad = GenConfig {
            split_fractions: [0.5, 0.5, 0.5],
            ..GenConfig::default()
        };
        assert!(generate(&bad).is_err());
        let bad = GenConfig {
            c: 1,
            ..GenConfig::default()
        };
        assert!(generate(&bad).is_err());
    }

    #[test]
    fn csv_round_trip_and_validation() {
        let ds = generate(&GenConfig {
            n: 40,
            ..GenConfig::default()
        })
        .unwrap();
        let text = to_csv(&ds);
        let back = from_csv(&text, 4, ds.meta.clone()).unwrap();
        assert_eq!(back, ds);

        let mut lines: Vec<String> = text.lines().map(str::to_owned).collect();
        let mut cells: Vec<String> = lines[3].split(',').map(str::to_owned).collect();
        let label_col = cells.len() - 2;
        cells[label_col] = "7".into();
        lines[3] = cells.join(",");
        let err = from_csv(&lines.join("\n"), 4, ds.meta.clone()).unwrap_err();
        assert!(err.to_string().contains("row 4"), "{err}");

        let no_split: String = text
            .lines()
            .map(|l| l.rsplit_once(',').unwrap().0.to_owned() + "\n")
            .collect();
        assert!(from_csv(&no_split, 4, ds.meta.clone()).is_err());
    }

    #[test]
    fn stratified_fractions() {
        let ds = generate(&GenConfig::default()).unwrap();
        for k in 0..4 {
            let members = ds.labels.iter().filter(|&&y| y == k).count() as f64;
            let train = ds.splits.train.iter().filter(|&&i| ds.labels[i] == k).count() as f64;
            assert!((train - 0.6 * members).abs() <= 1.0);
        }
    }

    #[test]
    fn coordinates_stay_in_the_gulf_box() {
        let ds = generate(&GenConfig {
            cluster_std: 5.0,
            ..GenConfig::default()
        })
        .unwrap();
        for p in &ds.coords {
            assert!((15.0..=33.0).contains(&p.lat) && (34.0..=61.0).contains(&p.lon));
        }
    }

    #[test]
    fn gap_shrinks_without_a_spatial_label_field() {
        let base = GenConfig::default();
        let spatial = relational_gap_probe(&generate(&base).unwrap(), 5).unwrap();
        // An infinite bandwidth makes every class field exactly constant.
        let flat = GenConfig {
            label_field_bandwidth: f64::INFINITY,
            ..base
        };
        let flat = relational_gap_probe(&generate(&flat).unwrap(), 5).unwrap();
        assert!(spatial > 0.05 && flat < spatial / 2.0, "{spatial} vs {flat}");
    }

    #[test]
    fn probe_boundaries() {
        let ds = generate(&GenConfig {
            n: 80,
            ..GenConfig::default()
        })
        .unwrap();
        assert!(relational_gap_probe(&ds, ds.len() - 1).unwrap().is_finite());
        assert!(relational_gap_probe(&ds, 0).is_err());
    }

    #[test]
    fn unbalanceable_config_fails_with_advice() {
        let err = generate(&GenConfig {
            n: 5,
            ..GenConfig::default()
        })
        .unwrap_err();
        assert!(err.to_string().contains("10 attempts"), "{err}");
    }

    #[test]
    fn neighbours_mostly_share_labels() {
        let ds = generate(&GenConfig::default()).unwrap();
        let nb = nearest_neighbors(&ds.coords, 5);
        let share: f64 = nb
            .iter()
            .enumerate()
            .map(|(i, v)| v.iter().filter(|&&j| ds.labels[j] == ds.labels[i]).count() as f64 / 5.0)
            .sum::<f64>()
            / ds.len() as f64;
        assert!(share > 0.5, "share {share}");
    }
}
