//! Results must not depend on how many threads do the work.
#![cfg(feature = "parallel")]

use geogwl::datagen::{generate, to_csv, GenConfig};
use geogwl::geoggnn::{init_model, train, GcnConfig};
use geogwl::geograph::{build_graph, KernelConfig};
use geogwl::smoothlab::{run_experiment, ExperimentConfig, Grid};
use geogwl::tensor::{matmul, Matrix, Rng};

fn one_thread<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(f)
}

fn four_threads<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap().install(f)
}

#[test]
fn matmul_is_thread_count_independent() {
    let mut rng = Rng::new(1);
    let a = Matrix::from_vec(300, 200, (0..60_000).map(|_| rng.normal(0.0, 1.0)).collect()).unwrap();
    let b = Matrix::from_vec(200, 150, (0..30_000).map(|_| rng.normal(0.0, 1.0)).collect()).unwrap();
    assert_eq!(one_thread(|| matmul(&a, &b).unwrap()), four_threads(|| matmul(&a, &b).unwrap()));
}

#[test]
fn pipeline_is_thread_count_independent() {
    let run = || {
        let ds = generate(&GenConfig::default()).unwrap();
        let x = ds.standardized_features().unwrap();
        let g = build_graph(&ds.coords, &KernelConfig::default()).unwrap();
        let cfg = GcnConfig {
            max_epochs: 30,
            ..GcnConfig::default()
        };
        let m = init_model(&cfg, &mut Rng::new(cfg.seed)).unwrap();
        let (m, trace) = train(&m, &g, &x, &ds.labels, &ds.splits).unwrap();
        (to_csv(&ds), m, trace)
    };
    assert_eq!(one_thread(run), four_threads(run));
}

#[test]
fn smoothing_trials_are_thread_count_independent() {
    let cfg = ExperimentConfig {
        trials: 6,
        grid: Grid::unit_square(16),
        variance_redraws: 4,
        ..ExperimentConfig::default()
    };
    assert_eq!(one_thread(|| run_experiment(&cfg).unwrap()), four_threads(|| run_experiment(&cfg).unwrap()));
}
