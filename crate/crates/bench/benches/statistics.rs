use criterion::{black_box, criterion_group, criterion_main, Criterion};
use mbm_bench::sinusoidal_hurst;
use mbm_core::localtime::{default_dx, local_time_field, XGrid};
use mbm_core::stats::energy_test_1d;
use mbm_core::synth::{KernelPlan, KernelQuadrature};
use mbm_core::{Representation, TimeGrid};

fn field(c: &mut Criterion) {
    let h = sinusoidal_hurst();
    let grid = TimeGrid::spanning(0.0, 1.0, 1 << 14 | 1).unwrap();
    let path = KernelPlan::new(&h, &grid, KernelQuadrature::default(), Representation::MovingAverage)
        .unwrap()
        .sample(3)
        .unwrap();
    let dx = default_dx(&grid, 0.5, 1.0);
    let (lo, hi) = path.min_max();
    c.bench_function("local_time_field_16384", |b| {
        b.iter(|| local_time_field(black_box(&path), XGrid::covering(lo, hi, dx, 0.0).unwrap()).unwrap())
    });
}

fn energy(c: &mut Criterion) {
    let a: Vec<f64> = (0..500).map(|i| ((i * 37) % 101) as f64 / 101.0).collect();
    let b: Vec<f64> = (0..500).map(|i| ((i * 53) % 97) as f64 / 97.0 + 0.05).collect();
    c.bench_function("energy_test_500x500_p200", |bch| {
        bch.iter(|| energy_test_1d(black_box(&a), black_box(&b), 200, 1).unwrap())
    });
}

criterion_group!(benches, field, energy);
criterion_main!(benches);
