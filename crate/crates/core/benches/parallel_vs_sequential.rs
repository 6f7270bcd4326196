//! Parallel vs sequential execution of the hot loops. With the `parallel`
//! feature off both variants run the sequential path.

use std::hint::black_box;

use aeot::eval::energy_distance;
use aeot::nn::{loss_and_grads, Activation, Mlp};
use aeot::ot::{cost_matrix, solve_many, CostMatrix, DiscreteMeasure};
use aeot::par;
use aeot::rng::SeededRng;
use aeot::Matrix;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn gaussian(rng: &mut SeededRng, rows: usize, cols: usize) -> Matrix {
    let mut data = vec![0.0; rows * cols];
    rng.fill_normal(&mut data);
    Matrix::from_vec(rows, cols, data).unwrap()
}

fn compare<F: Fn()>(c: &mut Criterion, group: &str, size: usize, f: F) {
    let mut g = c.benchmark_group(group);
    g.sample_size(10);
    g.bench_with_input(BenchmarkId::new("parallel", size), &size, |b, _| b.iter(&f));
    g.bench_with_input(BenchmarkId::new("sequential", size), &size, |b, _| {
        b.iter(|| par::sequential(&f))
    });
    g.finish();
}

fn loss_gradients(c: &mut Criterion) {
    let mut rng = SeededRng::new(1, 0);
    let net = Mlp::init(
        &[2, 512, 512, 512, 1],
        Activation::Relu,
        Activation::Identity,
        &mut rng,
    )
    .unwrap();
    let m = 256;
    let batch = gaussian(&mut rng, m, 2);
    let targets = vec![0.5; m];
    let dist = vec![1.0; m];
    compare(c, "loss_and_grads", m, || {
        black_box(loss_and_grads(&net, &batch, &targets, &dist, 0.1).unwrap());
    });
}

fn batched_ot(c: &mut Criterion) {
    let mut rng = SeededRng::new(2, 0);
    let m = 64;
    let costs: Vec<CostMatrix> = (0..8)
        .map(|_| {
            let src = DiscreteMeasure::new(gaussian(&mut rng, m, 10)).unwrap();
            let tgt = DiscreteMeasure::new(gaussian(&mut rng, m, 10)).unwrap();
            cost_matrix(&src, &tgt).unwrap()
        })
        .collect();
    compare(c, "solve_many", m, || {
        black_box(solve_many(&costs));
    });
}

fn energy(c: &mut Criterion) {
    let mut rng = SeededRng::new(3, 0);
    let n = 1000;
    let a = gaussian(&mut rng, n, 784);
    let b = gaussian(&mut rng, n, 784);
    compare(c, "energy_distance", n, || {
        black_box(energy_distance(&a, &b).unwrap());
    });
}

criterion_group!(benches, loss_gradients, batched_ot, energy);
criterion_main!(benches);
