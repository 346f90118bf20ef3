//! Kernel smoothing of noisy class-probability fields on a regular grid.
//!
//! A smooth true field `h*` assigns a probability vector to every grid
//! cell. A noisy pointwise estimate `h` perturbs it independently per cell,
//! and `h_W` replaces each cell by a Gaussian-weighted average of `h` over
//! the whole grid. The experiment measures the squared L2 error of `h` and
//! `h_W` against `h*` to see when spatial averaging pays off.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{arg_err, shape_err, Result};
use crate::par;
use crate::tensor::Rng;

/// Cell-centred uniform grid with square cells.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub nx: usize,
    pub ny: usize,
    pub spacing: f64,
    pub origin: (f64, f64),
}

impl Default for Grid {
    /// 64 x 64 cells over the unit square.
    fn default() -> Self {
        Self::unit_square(64)
    }
}

impl Grid {
    pub fn unit_square(cells: usize) -> Self {
        Self {
            nx: cells,
            ny: cells,
            spacing: 1.0 / cells as f64,
            origin: (0.0, 0.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx == 0 || self.ny == 0 {
            return arg_err("grid needs at least one cell per axis");
        }
        if !(self.spacing > 0.0 && self.spacing.is_finite()) {
            return arg_err(format!("grid spacing must be positive, got {}", self.spacing));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_area(&self) -> f64 {
        self.spacing * self.spacing
    }

    /// Longest side of the covered rectangle.
    pub fn extent(&self) -> f64 {
        self.nx.max(self.ny) as f64 * self.spacing
    }

    /// Centre of cell `(i, j)`, `i` along x.
    pub fn point(&self, i: usize, j: usize) -> (f64, f64) {
        (
            self.origin.0 + (i as f64 + 0.5) * self.spacing,
            self.origin.1 + (j as f64 + 0.5) * self.spacing,
        )
    }

    fn xs(&self) -> Vec<f64> {
        (0..self.nx).map(|i| self.point(i, 0).0).collect()
    }

    fn ys(&self) -> Vec<f64> {
        (0..self.ny).map(|j| self.point(0, j).1).collect()
    }
}

/// One vector of `classes` values per grid cell, cell `(i, j)` stored at
/// `(j * nx + i) * classes`.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    pub grid: Grid,
    pub classes: usize,
    pub values: Vec<f64>,
}

impl Field {
    pub fn filled(grid: Grid, classes: usize, value: &[f64]) -> Result<Self> {
        if value.len() != classes {
            return shape_err(format!("{} values for {classes} classes", value.len()));
        }
        Ok(Self {
            grid,
            classes,
            values: value.repeat(grid.len()),
        })
    }

    pub fn at(&self, i: usize, j: usize) -> &[f64] {
        let p = (j * self.grid.nx + i) * self.classes;
        &self.values[p..p + self.classes]
    }

    fn cells(&self) -> std::slice::ChunksExact<'_, f64> {
        self.values.chunks_exact(self.classes)
    }

    /// Largest deviation of any cell from the probability simplex.
    pub fn simplex_violation(&self) -> f64 {
        self.cells()
            .map(|v| {
                let neg = v.iter().fold(0.0f64, |m, &x| m.max(-x));
                neg.max((v.iter().sum::<f64>() - 1.0).abs())
            })
            .fold(0.0, f64::max)
    }

    /// Largest change of any component between edge-adjacent cells.
    pub fn max_adjacent_change(&self) -> f64 {
        let g = &self.grid;
        let mut worst = 0.0f64;
        for j in 0..g.ny {
            for i in 0..g.nx {
                let here = self.at(i, j);
                let mut cmp = |other: &[f64]| {
                    for (a, b) in here.iter().zip(other) {
                        worst = worst.max((a - b).abs());
                    }
                };
                if i + 1 < g.nx {
                    cmp(self.at(i + 1, j));
                }
                if j + 1 < g.ny {
                    cmp(self.at(i, j + 1));
                }
            }
        }
        worst
    }
}

/// An isotropic Gaussian bump contributing to one class score.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub center: (f64, f64),
    pub amplitude: f64,
    pub width: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FieldConfig {
    pub classes: usize,
    pub bumps_per_class: usize,
    /// Bump width as a fraction of the grid extent.
    pub bump_width: f64,
    /// Amplitudes are drawn from `[-max_amplitude, max_amplitude]`.
    pub max_amplitude: f64,
}

impl Default for FieldConfig {
    fn default() -> Self {
        Self {
            classes: 4,
            bumps_per_class: 3,
            bump_width: 0.2,
            max_amplitude: 2.0,
        }
    }
}

impl FieldConfig {
    pub fn validate(&self) -> Result<()> {
        if self.classes < 2 {
            return arg_err(format!("need at least 2 classes, got {}", self.classes));
        }
        if self.bumps_per_class == 0 || !(self.bump_width > 0.0) || !(self.max_amplitude >= 0.0) {
            return arg_err("bump count and width must be positive, amplitude >= 0");
        }
        Ok(())
    }
}

/// Softmax over per-class sums of bumps evaluated at every cell centre.
pub fn field_from_bumps(grid: &Grid, bumps: &[Vec<Bump>]) -> Result<Field> {
    grid.validate()?;
    if bumps.len() < 2 {
        return arg_err(format!("need at least 2 classes, got {}", bumps.len()));
    }
    if let Some(b) = bumps.iter().flatten().find(|b| !(b.width > 0.0)) {
        return arg_err(format!("bump width must be positive, got {}", b.width));
    }
    let c = bumps.len();
    let mut values = vec![0.0; grid.len() * c];
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let (x, y) = grid.point(i, j);
            let cell = &mut values[(j * grid.nx + i) * c..][..c];
            for (v, class_bumps) in cell.iter_mut().zip(bumps) {
                *v = class_bumps
                    .iter()
                    .map(|b| {
                        let d2 = (x - b.center.0).powi(2) + (y - b.center.1).powi(2);
                        b.amplitude * (-d2 / (2.0 * b.width * b.width)).exp()
                    })
                    .sum();
            }
            crate::tensor::softmax_in_place(cell);
        }
    }
    Ok(Field {
        grid: *grid,
        classes: c,
        values,
    })
}

pub fn random_bumps(grid: &Grid, config: &FieldConfig, rng: &mut Rng) -> Vec<Vec<Bump>> {
    let w = config.bump_width * grid.extent();
    let (x0, y0) = grid.origin;
    let (x1, y1) = (
        x0 + grid.nx as f64 * grid.spacing,
        y0 + grid.ny as f64 * grid.spacing,
    );
    (0..config.classes)
        .map(|_| {
            (0..config.bumps_per_class)
                .map(|_| Bump {
                    center: (rng.uniform(x0, x1), rng.uniform(y0, y1)),
                    amplitude: rng.uniform(-config.max_amplitude, config.max_amplitude),
                    width: w,
                })
                .collect()
        })
        .collect()
}

/// A random smooth true field: softmax of random bump mixtures.
pub fn make_smooth_field(grid: &Grid, config: &FieldConfig, rng: &mut Rng) -> Result<Field> {
    config.validate()?;
    field_from_bumps(grid, &random_bumps(grid, config, rng))
}

/// Adds i.i.d. Gaussian noise to every component, clips at zero and
/// renormalizes. A cell clipped to all zeros becomes uniform.
pub fn perturb(field: &Field, noise_std: f64, rng: &mut Rng) -> Result<Field> {
    if !(noise_std >= 0.0 && noise_std.is_finite()) {
        return arg_err(format!("noise_std must be >= 0, got {noise_std}"));
    }
    if noise_std == 0.0 {
        return Ok(field.clone());
    }
    let mut out = field.clone();
    let c = field.classes;
    for cell in out.values.chunks_exact_mut(c) {
        for v in cell.iter_mut() {
            *v = (*v + rng.normal(0.0, noise_std)).max(0.0);
        }
        normalize(cell);
    }
    Ok(out)
}

fn normalize(cell: &mut [f64]) {
    let s: f64 = cell.iter().sum();
    if s > 0.0 {
        cell.iter_mut().for_each(|v| *v /= s);
    } else {
        let u = 1.0 / cell.len() as f64;
        cell.iter_mut().for_each(|v| *v = u);
    }
}

/// `K[a][b] = exp(-(p_a - p_b)^2 / (2 bw^2))` along one axis.
fn axis_kernel(pos: &[f64], bandwidth: f64) -> Vec<f64> {
    let n = pos.len();
    let xi = 1.0 / (2.0 * bandwidth * bandwidth);
    let mut k = vec![0.0; n * n];
    for a in 0..n {
        for b in 0..n {
            k[a * n + b] = (-xi * (pos[a] - pos[b]).powi(2)).exp();
        }
    }
    k
}

/// Normalized Gaussian-kernel average over all cells, renormalized onto the
/// simplex. The 2-D kernel factorizes over the axes, so it is applied as two
/// 1-D passes; the weight total at a cell is the product of axis row sums.
pub fn kernel_smooth(field: &Field, bandwidth: f64) -> Result<Field> {
    if !(bandwidth > 0.0) {
        return arg_err(format!("bandwidth must be positive, got {bandwidth}"));
    }
    let g = field.grid;
    let c = field.classes;
    let (nx, ny) = (g.nx, g.ny);
    let kx = axis_kernel(&g.xs(), bandwidth);
    let ky = axis_kernel(&g.ys(), bandwidth);
    let sx: Vec<f64> = kx.chunks_exact(nx).map(|r| r.iter().sum()).collect();
    let sy: Vec<f64> = ky.chunks_exact(ny).map(|r| r.iter().sum()).collect();

    // Pass along x: rows are independent.
    let mut tmp = vec![0.0; field.values.len()];
    for j in 0..ny {
        let src = &field.values[j * nx * c..(j + 1) * nx * c];
        let dst = &mut tmp[j * nx * c..(j + 1) * nx * c];
        for i in 0..nx {
            let w = &kx[i * nx..(i + 1) * nx];
            let out = &mut dst[i * c..(i + 1) * c];
            for (ip, &wv) in w.iter().enumerate() {
                if wv == 0.0 {
                    continue;
                }
                for (o, s) in out.iter_mut().zip(&src[ip * c..(ip + 1) * c]) {
                    *o += wv * s;
                }
            }
        }
    }
    // Pass along y, then divide by the weight total and renormalize.
    let mut values = vec![0.0; field.values.len()];
    for j in 0..ny {
        let w = &ky[j * ny..(j + 1) * ny];
        let dst = &mut values[j * nx * c..(j + 1) * nx * c];
        for (jp, &wv) in w.iter().enumerate() {
            if wv == 0.0 {
                continue;
            }
            for (o, s) in dst.iter_mut().zip(&tmp[jp * nx * c..(jp + 1) * nx * c]) {
                *o += wv * s;
            }
        }
        for i in 0..nx {
            let total = sx[i] * sy[j];
            let cell = &mut dst[i * c..(i + 1) * c];
            cell.iter_mut().for_each(|v| *v /= total);
            normalize(cell);
        }
    }
    Ok(Field {
        grid: g,
        classes: c,
        values,
    })
}

/// Riemann sum of the squared Euclidean distance between two fields.
pub fn error_functional(approx: &Field, truth: &Field) -> Result<f64> {
    if approx.grid != truth.grid || approx.classes != truth.classes {
        return shape_err(format!(
            "fields differ: {}x{} grid with {} classes vs {}x{} with {}",
            approx.grid.nx,
            approx.grid.ny,
            approx.classes,
            truth.grid.nx,
            truth.grid.ny,
            truth.classes
        ));
    }
    let s: f64 = approx
        .values
        .iter()
        .zip(&truth.values)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(s * approx.grid.cell_area())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub trials: usize,
    pub seed: u64,
    pub grid: Grid,
    pub field: FieldConfig,
    pub noise_std: f64,
    /// Bandwidths in multiples of the grid spacing.
    pub bandwidth_multiples: Vec<f64>,
    /// Noise redraws for the variance check; 0 skips it.
    pub variance_redraws: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            trials: 100,
            seed: 42,
            grid: Grid::default(),
            field: FieldConfig::default(),
            noise_std: 0.3,
            bandwidth_multiples: vec![1.0, 1.5, 2.0, 3.0, 4.0],
            variance_redraws: 50,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return arg_err("need at least one trial");
        }
        self.grid.validate()?;
        self.field.validate()?;
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return arg_err(format!("noise_std must be >= 0, got {}", self.noise_std));
        }
        if self.bandwidth_multiples.is_empty() || self.bandwidth_multiples.iter().any(|&b| !(b > 0.0)) {
            return arg_err("bandwidth sweep must be non-empty and positive");
        }
        if self.variance_redraws == 1 {
            return arg_err("variance check needs at least 2 redraws");
        }
        Ok(())
    }

    pub fn bandwidths(&self) -> Vec<f64> {
        self.bandwidth_multiples
            .iter()
            .map(|m| m * self.grid.spacing)
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorPair {
    pub trial: usize,
    pub seed: u64,
    pub noise_std: f64,
    pub bandwidth: f64,
    pub e_h: f64,
    pub e_hw: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarianceCheck {
    pub redraws: usize,
    pub bandwidth: f64,
    /// Allowed ratio `var(h_W) / var(h)` before a cell counts as a violation.
    pub tolerance: f64,
    pub cells: usize,
    pub violations: usize,
    pub max_ratio: f64,
}

impl VarianceCheck {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub trials: usize,
    pub seed: u64,
    pub noise_std: f64,
    pub bandwidths: Vec<f64>,
    /// Fraction of trials where the best bandwidth beats the raw estimate.
    pub win_rate: f64,
    /// Per bandwidth, fraction of trials where smoothing wins.
    pub win_rate_by_bandwidth: Vec<f64>,
    pub best_bandwidth: Vec<f64>,
    pub mean_e_h: f64,
    pub mean_best_e_hw: f64,
    /// Without noise the raw estimate is exact and smoothing cannot win.
    pub noiseless: bool,
    pub variance_check: Option<VarianceCheck>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Experiment {
    pub pairs: Vec<ErrorPair>,
    pub summary: Summary,
}

fn run_trial(config: &ExperimentConfig, trial: usize, bandwidths: &[f64]) -> Result<Vec<ErrorPair>> {
    let mut rng = Rng::derive(config.seed, trial as u64);
    let truth = make_smooth_field(&config.grid, &config.field, &mut rng)?;
    let noisy = perturb(&truth, config.noise_std, &mut rng)?;
    let e_h = error_functional(&noisy, &truth)?;
    bandwidths
        .iter()
        .map(|&bw| {
            let e_hw = error_functional(&kernel_smooth(&noisy, bw)?, &truth)?;
            Ok(ErrorPair {
                trial,
                seed: config.seed,
                noise_std: config.noise_std,
                bandwidth: bw,
                e_h,
                e_hw,
            })
        })
        .collect()
}

/// Per-cell variance of `h` and `h_W` over repeated noise draws on one
/// fixed true field; a cell violates when `var(h_W) > tolerance * var(h)`.
/// Variances are summed over classes.
pub fn variance_check(
    grid: &Grid,
    field: &FieldConfig,
    noise_std: f64,
    bandwidth: f64,
    redraws: usize,
    seed: u64,
) -> Result<VarianceCheck> {
    if redraws < 2 {
        return arg_err("variance check needs at least 2 redraws");
    }
    let truth = make_smooth_field(grid, field, &mut Rng::derive(seed, u64::MAX))?;
    let draws: Vec<(Field, Field)> = par::map_range(redraws, |r| {
        let mut rng = Rng::derive(seed, u64::MAX - 1 - r as u64);
        let h = perturb(&truth, noise_std, &mut rng)?;
        let hw = kernel_smooth(&h, bandwidth)?;
        Ok((h, hw))
    })
    .into_iter()
    .collect::<Result<_>>()?;

    let var = |pick: &dyn Fn(&(Field, Field)) -> &Field, k: usize| -> f64 {
        let m = draws.iter().map(|d| pick(d).values[k]).sum::<f64>() / redraws as f64;
        draws.iter().map(|d| (pick(d).values[k] - m).powi(2)).sum::<f64>() / (redraws - 1) as f64
    };
    // Sampling error of a variance estimate is about sqrt(2 / (R - 1)).
    let tolerance = 1.0 + 3.0 * (2.0 / (redraws - 1) as f64).sqrt();
    let c = truth.classes;
    let mut violations = 0;
    let mut max_ratio = 0.0f64;
    for cell in 0..grid.len() {
        let (mut vh, mut vw) = (0.0, 0.0);
        for k in cell * c..(cell + 1) * c {
            vh += var(&|d| &d.0, k);
            vw += var(&|d| &d.1, k);
        }
        if vw > tolerance * vh {
            violations += 1;
        }
        if vh > 0.0 {
            max_ratio = max_ratio.max(vw / vh);
        }
    }
    Ok(VarianceCheck {
        redraws,
        bandwidth,
        tolerance,
        cells: grid.len(),
        violations,
        max_ratio,
    })
}

/// Independent trials, each with its own true field and noise; trial `t`
/// draws from stream `t` of the seed so results do not depend on scheduling.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Experiment> {
    config.validate()?;
    let bandwidths = config.bandwidths();
    let per_trial: Vec<Vec<ErrorPair>> = par::map_range(config.trials, |t| run_trial(config, t, &bandwidths))
        .into_iter()
        .collect::<Result<_>>()?;

    let n = config.trials as f64;
    let mut wins = 0usize;
    let mut wins_by_bw = vec![0usize; bandwidths.len()];
    let mut best_bandwidth = Vec::with_capacity(config.trials);
    let (mut sum_h, mut sum_best) = (0.0, 0.0);
    for pairs in &per_trial {
        let best = pairs
            .iter()
            .min_by(|a, b| a.e_hw.total_cmp(&b.e_hw))
            .expect("sweep is non-empty");
        if best.e_hw < best.e_h {
            wins += 1;
        }
        for (k, p) in pairs.iter().enumerate() {
            if p.e_hw < p.e_h {
                wins_by_bw[k] += 1;
            }
        }
        best_bandwidth.push(best.bandwidth);
        sum_h += best.e_h;
        sum_best += best.e_hw;
    }
    let variance_check = if config.variance_redraws > 0 && config.noise_std > 0.0 {
        let mid = bandwidths[bandwidths.len() / 2];
        Some(variance_check(
            &config.grid,
            &config.field,
            config.noise_std,
            mid,
            config.variance_redraws,
            config.seed,
        )?)
    } else {
        None
    };
    Ok(Experiment {
        pairs: per_trial.into_iter().flatten().collect(),
        summary: Summary {
            trials: config.trials,
            seed: config.seed,
            noise_std: config.noise_std,
            bandwidths,
            win_rate: wins as f64 / n,
            win_rate_by_bandwidth: wins_by_bw.iter().map(|&w| w as f64 / n).collect(),
            best_bandwidth,
            mean_e_h: sum_h / n,
            mean_best_e_hw: sum_best / n,
            noiseless: config.noise_std == 0.0,
            variance_check,
        },
    })
}

impl Experiment {
    /// `trial,noise_std,bandwidth,e_h,e_hw`, one row per trial and bandwidth.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("trial,noise_std,bandwidth,e_h,e_hw\n");
        for p in &self.pairs {
            let _ = writeln!(
                out,
                "{},{},{:.17e},{:.17e},{:.17e}",
                p.trial, p.noise_std, p.bandwidth, p.e_h, p.e_hw
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn small() -> Grid {
        Grid::unit_square(16)
    }

    /// Direct O(n^2) evaluation of the normalized kernel average.
    fn smooth_direct(field: &Field, bw: f64) -> Field {
        let g = field.grid;
        let c = field.classes;
        let mut values = Vec::with_capacity(field.values.len());
        for j in 0..g.ny {
            for i in 0..g.nx {
                let (x, y) = g.point(i, j);
                let mut acc = vec![0.0; c];
                let mut total = 0.0;
                for jp in 0..g.ny {
                    for ip in 0..g.nx {
                        let (xp, yp) = g.point(ip, jp);
                        let w = (-((x - xp).powi(2) + (y - yp).powi(2)) / (2.0 * bw * bw)).exp();
                        total += w;
                        for (a, v) in acc.iter_mut().zip(field.at(ip, jp)) {
                            *a += w * v;
                        }
                    }
                }
                let s: f64 = acc.iter().sum();
                values.extend(acc.iter().map(|a| a / total / (s / total)));
            }
        }
        Field { grid: g, classes: c, values }
    }

    fn noisy_field(seed: u64) -> (Field, Field) {
        let mut rng = Rng::new(seed);
        let truth = make_smooth_field(&small(), &FieldConfig::default(), &mut rng).unwrap();
        let h = perturb(&truth, 0.3, &mut rng).unwrap();
        (truth, h)
    }

    #[test]
    fn separable_smoothing_matches_direct_sum() {
        let (_, h) = noisy_field(3);
        for bw in [0.03, 0.1, 0.5] {
            let fast = kernel_smooth(&h, bw).unwrap();
            let slow = smooth_direct(&h, bw);
            let diff = fast
                .values
                .iter()
                .zip(&slow.values)
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            assert!(diff < 1e-12, "bw {bw}: {diff}");
            assert!(fast.simplex_violation() < 1e-12);
        }
    }

    #[test]
    fn bandwidth_limits() {
        let (_, h) = noisy_field(5);
        let g = h.grid;
        let sharp = kernel_smooth(&h, 1e-6 * g.spacing).unwrap();
        for (a, b) in sharp.values.iter().zip(&h.values) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-9);
        }
        let flat = kernel_smooth(&h, 1e6 * g.extent()).unwrap();
        let c = h.classes;
        let mut mean = vec![0.0; c];
        for cell in h.values.chunks_exact(c) {
            for (m, v) in mean.iter_mut().zip(cell) {
                *m += v / g.len() as f64;
            }
        }
        for cell in flat.values.chunks_exact(c) {
            for (v, m) in cell.iter().zip(&mean) {
                assert_abs_diff_eq!(v, m, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn constants_survive_smoothing() {
        let f = Field::filled(small(), 3, &[0.2, 0.3, 0.5]).unwrap();
        let s = kernel_smooth(&f, 0.07).unwrap();
        for (a, b) in s.values.iter().zip(&f.values) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-15);
        }
    }

    #[test]
    fn transect_between_two_bumps_is_monotone() {
        let g = Grid::unit_square(64);
        let bump = |x| Bump {
            center: (x, 0.5),
            amplitude: 1.5,
            width: 0.2,
        };
        let f = field_from_bumps(&g, &[vec![bump(0.25)], vec![bump(0.75)]]).unwrap();
        // Row j = 31 holds y just below 0.5; the transect runs over x in [0.25, 0.75].
        let along: Vec<f64> = (16..48).map(|i| f.at(i, 31)[0]).collect();
        assert!(along.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn equal_scores_give_uniform_field() {
        let b = Bump {
            center: (0.3, 0.3),
            amplitude: 1.0,
            width: 0.1,
        };
        let f = field_from_bumps(&small(), &[vec![b], vec![b], vec![b]]).unwrap();
        for v in &f.values {
            assert_abs_diff_eq!(*v, 1.0 / 3.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn random_fields_are_smooth_probabilities() {
        for seed in 0..10 {
            let g = Grid::default();
            let f = make_smooth_field(&g, &FieldConfig::default(), &mut Rng::new(seed)).unwrap();
            assert!(f.simplex_violation() < 1e-12);
            assert!(f.max_adjacent_change() < 10.0 * g.spacing);
        }
    }

    #[test]
    fn perturbation() {
        let (truth, h) = noisy_field(8);
        assert!(h.simplex_violation() < 1e-12);
        assert!(error_functional(&h, &truth).unwrap() > 0.0);
        let same = perturb(&truth, 0.0, &mut Rng::new(1)).unwrap();
        assert_eq!(same, truth);
        assert_eq!(error_functional(&same, &truth).unwrap(), 0.0);
        let a = perturb(&truth, 0.3, &mut Rng::new(2)).unwrap();
        let b = perturb(&truth, 0.3, &mut Rng::new(2)).unwrap();
        assert_eq!(a, b);
        assert!(perturb(&truth, -1.0, &mut Rng::new(2)).is_err());
    }

    #[test]
    fn error_functional_closed_form() {
        let g = Grid::unit_square(32);
        let a = Field::filled(g, 2, &[0.5, 0.5]).unwrap();
        let b = Field::filled(g, 2, &[0.5 + 0.1, 0.5]).unwrap();
        assert_abs_diff_eq!(error_functional(&b, &a).unwrap(), 0.01, epsilon = 1e-12);
        assert_eq!(error_functional(&a, &a).unwrap(), 0.0);
        let other = Field::filled(Grid::unit_square(16), 2, &[0.5, 0.5]).unwrap();
        assert!(error_functional(&a, &other).is_err());
    }

    #[test]
    fn error_functional_converges_under_refinement() {
        let cfg = FieldConfig::default();
        let mut rng = Rng::new(4);
        let g = Grid::default();
        let p = random_bumps(&g, &cfg, &mut rng);
        let q = random_bumps(&g, &cfg, &mut rng);
        let e = |cells| {
            let g = Grid::unit_square(cells);
            error_functional(&field_from_bumps(&g, &p).unwrap(), &field_from_bumps(&g, &q).unwrap())
                .unwrap()
        };
        let (coarse, fine) = (e(64), e(128));
        assert!(((coarse - fine) / fine).abs() < 0.05, "{coarse} vs {fine}");
    }

    #[test]
    fn small_experiment_is_reproducible() {
        let cfg = ExperimentConfig {
            trials: 3,
            grid: small(),
            variance_redraws: 5,
            ..ExperimentConfig::default()
        };
        let a = run_experiment(&cfg).unwrap();
        let b = run_experiment(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.pairs.len(), 15);
        assert_eq!(a.to_csv().lines().count(), 16);

        let quiet = run_experiment(&ExperimentConfig { noise_std: 0.0, ..cfg }).unwrap();
        assert_eq!(quiet.summary.win_rate, 0.0);
        assert!(quiet.summary.noiseless && quiet.summary.variance_check.is_none());
    }
}
