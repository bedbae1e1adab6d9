use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use thirdsound_bench::{bare_config, driven_params};
use thirdsound_core::sim::Integrator;
use thirdsound_core::{SimConfig, Simulator};

const SAMPLES: usize = 1 << 16;

fn run(cfg: &SimConfig) -> usize {
    let mut sim = Simulator::new(cfg).expect("valid config");
    let (mut x, mut h) = (Vec::with_capacity(SAMPLES), Vec::with_capacity(SAMPLES));
    sim.next_block(SAMPLES, &mut x, &mut h)
}

fn steps(c: &mut Criterion) {
    let mut group = c.benchmark_group("simulator");
    group.throughput(Throughput::Elements(SAMPLES as u64));
    let bare = bare_config(SAMPLES as f64 / 2e6, 2e6);
    for integrator in [Integrator::Exact, Integrator::EulerMaruyama] {
        let mut cfg = bare;
        cfg.integrator = integrator;
        group.bench_with_input(BenchmarkId::new("bare", integrator.name()), &cfg, |b, cfg| {
            b.iter(|| run(cfg))
        });
    }
    let driven = SimConfig::new(driven_params(), SAMPLES as f64 / 12e6, 12e6, 42);
    group.bench_with_input(BenchmarkId::new("photothermal", "exact"), &driven, |b, cfg| {
        b.iter(|| run(cfg))
    });
    group.finish();
}

criterion_group!(benches, steps);
criterion_main!(benches);
