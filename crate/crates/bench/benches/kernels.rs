use std::hint::black_box;

use blowup_bench::{lv_fixture, BurnFixture};
use blowup_core::blowup::{integrate, IntegratorConfig};
use blowup_core::burning::{mc_unburned_fraction, render_field, BurnWindow};
use blowup_core::lv::simulate;
use blowup_core::lyapunov::search_lambda;
use blowup_core::series::taylor_coefficients;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn blowup(c: &mut Criterion) {
    let cfg = IntegratorConfig::default();
    let mut g = c.benchmark_group("integrate");
    for d in [1, 3, 6] {
        g.bench_with_input(BenchmarkId::from_parameter(d), &d, |b, &d| b.iter(|| integrate(black_box(d), &cfg).unwrap()));
    }
    g.finish();

    let mut g = c.benchmark_group("taylor_coefficients");
    for n in [256, 2048] {
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, &n| b.iter(|| taylor_coefficients(3, black_box(n)).unwrap()));
    }
    g.finish();
}

fn lyapunov(c: &mut Criterion) {
    c.bench_function("search_lambda/d10", |b| b.iter(|| search_lambda(10, 2, black_box(500), 1)));
}

fn lv(c: &mut Criterion) {
    let (model, w0) = lv_fixture(11);
    c.bench_function("lv_simulate/d11_t100", |b| b.iter(|| simulate(&model, black_box(&w0), 100.0, 1e-10).unwrap()));
}

fn burning(c: &mut Criterion) {
    let probe = BurnFixture::new(2, 0.0, 1.5);
    let window = BurnWindow::new(2, 0.0, 1.5).unwrap();
    c.bench_function("mc_unburned_fraction/d2", |b| {
        b.iter(|| mc_unburned_fraction(&window, &probe.profile, 1.5, black_box(2000), 1).unwrap())
    });

    let field = BurnFixture::new(1, 10.0, 2.0);
    let atoms = field.atoms(3);
    c.bench_function("render_field/d1_512", |b| b.iter(|| render_field(&field.window, black_box(&atoms), 512).unwrap()));
}

criterion_group!(benches, blowup, lyapunov, lv, burning);
criterion_main!(benches);
