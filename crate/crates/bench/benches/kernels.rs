use criterion::{black_box, criterion_group, criterion_main, Criterion};
use sncl_bench::nonlocal_config;
use sncl_core::{convolve, forward_flow, sample_path, solve_picard, Field};

fn kernels(c: &mut Criterion) {
    let cfg = nonlocal_config();
    let u0 = cfg.regularized_initial().unwrap();
    let flux = cfg.regularized_flux().unwrap();
    let path = sample_path(1, 0, &cfg.time_grid);
    let hist: Vec<Field> = (0..64).map(|_| convolve(&u0, &cfg.kernel).unwrap()).collect();

    c.bench_function("convolve_2048", |b| {
        b.iter(|| convolve(black_box(&u0), &cfg.kernel).unwrap())
    });
    c.bench_function("forward_flow_2048x64", |b| {
        b.iter(|| forward_flow(&flux, black_box(&hist), &path, 0, 64).unwrap())
    });
    let mut g = c.benchmark_group("picard");
    g.sample_size(10);
    g.bench_function("solve_path_2048x64", |b| {
        b.iter(|| solve_picard(black_box(&cfg), &path).unwrap())
    });
    g.finish();
}

criterion_group!(benches, kernels);
criterion_main!(benches);
