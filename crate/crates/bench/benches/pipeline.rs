use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use gtkf_bench::reference_window;
use gtkf_core::chi2::chi2_quantile;
use gtkf_core::decoder::decode;
use gtkf_core::SequentialDetector;

fn bench_pipeline(c: &mut Criterion) {
    let fx = reference_window(1e4, 42).expect("fixture");
    let sc = &fx.cfg.scenario;
    let det = SequentialDetector::new(fx.cfg.detector(), sc.num_sensors() * sc.window).expect("detector");

    c.bench_function("step_window/150x5/T50", |b| {
        b.iter(|| {
            det.step_window(&fx.phi, &sc.sensors, &sc.model, &sc.x0, black_box(&fx.measurements))
                .unwrap()
        })
    });
    c.bench_function("one_by_one_window/150x5", |b| {
        b.iter(|| {
            det.one_by_one_window(&sc.sensors, &sc.model, &sc.x0, black_box(&fx.measurements))
                .unwrap()
        })
    });
    c.bench_function("lp_decode/50x750", |b| {
        b.iter(|| decode(&fx.phi, black_box(&fx.outcome), &fx.cfg.decoder).unwrap())
    });
    c.bench_function("chi2_quantile/dof40", |b| {
        b.iter(|| chi2_quantile(black_box(0.9995), black_box(40)).unwrap())
    });
}

criterion_group!(benches, bench_pipeline);
criterion_main!(benches);
