use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use fracmild::{ml_scalar, MLOrder};

fn ml(c: &mut Criterion) {
    let mut group = c.benchmark_group("ml_scalar");
    let order = MLOrder::new(1.5, 1.0).unwrap();
    for z in [-0.5, -5.0, -50.0, -500.0] {
        group.bench_function(format!("q=1.5 z={z}"), |b| b.iter(|| ml_scalar(order, black_box(z)).unwrap()));
    }
    let order = MLOrder::new(1.5, 1.5).unwrap();
    group.bench_function("q=beta=1.5 z=-20", |b| b.iter(|| ml_scalar(order, black_box(-20.0)).unwrap()));
    group.finish();
}

criterion_group!(benches, ml);
criterion_main!(benches);
