use criterion::{black_box, criterion_group, criterion_main, Criterion};
use fbp_core::kernels::{d2_root, multipliers};
use fbp_core::numerics::linspace;

fn bench_multipliers(c: &mut Criterion) {
    c.bench_function("multipliers", |b| b.iter(|| multipliers(black_box(1.7), 1e-3)));
    let k = linspace(0.0, 40.0, 4001);
    c.bench_function("multipliers_table_4001", |b| {
        b.iter(|| k.iter().map(|&k| multipliers(k, 1e-3).d2).sum::<f64>())
    });
    c.bench_function("d2_root", |b| b.iter(d2_root));
}

criterion_group!(benches, bench_multipliers);
criterion_main!(benches);
