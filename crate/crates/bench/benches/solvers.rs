use criterion::{criterion_group, criterion_main, Criterion};
use fbp_core::geometry::{integrate_catenoid_profile, ChartKind};
use fbp_core::gluing::{harmonic_rhs, solve_model_dirichlet, standard_chart, GluingConfig, Tube};
use fbp_core::minimizer::{BarrierPair, BarrierSide, EnergyGrid};
use fbp_core::reduced_solver::HeightPair;

fn bench_profile(c: &mut Criterion) {
    c.bench_function("catenoid_profile_n3", |b| {
        b.iter(|| integrate_catenoid_profile(3, 1.0, 12.0, 0.01).unwrap())
    });
}

fn bench_model_solve(c: &mut Criterion) {
    let gc = GluingConfig::standard(ChartKind::Catenoid, 3, 0.2);
    let chart = standard_chart(ChartKind::Catenoid, 3, gc.eps, gc.l_max()).unwrap();
    let tube = Tube::new(chart, gc.nt, gc.l_step / gc.eps, gc.l_max(), gc.spectral.dim).unwrap();
    let rhs = harmonic_rhs(&tube, &HeightPair::zero(&tube.l)).unwrap();
    c.bench_function("model_dirichlet_solve", |b| b.iter(|| solve_model_dirichlet(&tube, &rhs).unwrap()));
}

fn bench_energy(c: &mut Criterion) {
    let mut grid = EnergyGrid::quarter_ball(6.0, 0.05).unwrap();
    let pair = BarrierPair::new(0.4, 6.0).unwrap();
    grid.u = pair.field(&grid, BarrierSide::Upper);
    c.bench_function("ball_energy_a6_h005", |b| b.iter(|| grid.energy()));
    c.bench_function("ball_smoothed_energy_a6_h005", |b| b.iter(|| grid.smoothed_energy(0.05)));
}

criterion_group!(benches, bench_profile, bench_model_solve, bench_energy);
criterion_main!(benches);
