//! Each kernel runs on the global rayon pool and inside a one-thread pool,
//! so a single run compares data-parallel against sequential execution.
//! Building with `--no-default-features` benchmarks the rayon-free path.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use geogwl::datagen::{generate, GenConfig};
use geogwl::geoggnn::{init_model, train, GcnConfig};
use geogwl::geograph::{build_gaussian_adjacency, build_graph, GeoPoint, KernelConfig};
use geogwl::smoothlab::{run_experiment, ExperimentConfig, Grid};
use geogwl::tensor::{matmul, Matrix, Rng};

/// Runs a closure in some execution mode.
type Runner = Box<dyn Fn(&mut (dyn FnMut() + Send))>;

fn modes() -> Vec<(&'static str, Runner)> {
    #[cfg(feature = "parallel")]
    {
        let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        vec![
            ("parallel", Box::new(|f: &mut (dyn FnMut() + Send)| f())),
            ("sequential", Box::new(move |f: &mut (dyn FnMut() + Send)| single.install(f))),
        ]
    }
    #[cfg(not(feature = "parallel"))]
    {
        vec![("sequential", Box::new(|f: &mut (dyn FnMut() + Send)| f()))]
    }
}

fn random(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut rng = Rng::new(seed);
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.normal(0.0, 1.0)).collect()).unwrap()
}

fn points(n: usize) -> Vec<GeoPoint> {
    let mut rng = Rng::new(3);
    (0..n)
        .map(|_| GeoPoint::new(rng.uniform(22.0, 30.0), rng.uniform(45.0, 58.0)).unwrap())
        .collect()
}

fn bench(c: &mut Criterion) {
    let a = random(256, 256, 1);
    let b = random(256, 256, 2);
    let pts = points(400);
    let ds = generate(&GenConfig::default()).unwrap();
    let x = ds.standardized_features().unwrap();
    let graph = build_graph(&ds.coords, &KernelConfig::default()).unwrap();
    let gcn = GcnConfig {
        max_epochs: 20,
        ..GcnConfig::default()
    };
    let model = init_model(&gcn, &mut Rng::new(1)).unwrap();
    let smooth = ExperimentConfig {
        trials: 8,
        grid: Grid::unit_square(32),
        variance_redraws: 0,
        ..ExperimentConfig::default()
    };

    let mut group = c.benchmark_group("kernels");
    group.sample_size(10);
    for (mode, run) in modes() {
        group.bench_function(BenchmarkId::new("matmul_256", mode), |bn| {
            bn.iter(|| run(&mut || {
                black_box(matmul(&a, &b).unwrap());
            }))
        });
        group.bench_function(BenchmarkId::new("gaussian_adjacency_400", mode), |bn| {
            bn.iter(|| run(&mut || {
                black_box(build_gaussian_adjacency(&pts, 0.25).unwrap());
            }))
        });
        group.bench_function(BenchmarkId::new("gcn_train_20_epochs", mode), |bn| {
            bn.iter(|| run(&mut || {
                black_box(train(&model, &graph, &x, &ds.labels, &ds.splits).unwrap());
            }))
        });
        group.bench_function(BenchmarkId::new("smoothing_trials_8", mode), |bn| {
            bn.iter(|| run(&mut || {
                black_box(run_experiment(&smooth).unwrap());
            }))
        });
    }
    group.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
