use criterion::{criterion_group, criterion_main, Criterion};
use thirdsound_core::backaction::{detuning_sweep, fit_detuning_sweep_pinned, linspace, Pinned};
use thirdsound_core::scenarios::ModeScenario;

fn sweep(c: &mut Criterion) {
    let params = ModeScenario::heating().system_params(-0.58).expect("valid scenario");
    let detunings = linspace(-2.0, 2.0, 401);
    c.bench_function("detuning_sweep_401", |b| {
        b.iter(|| detuning_sweep(&params, &detunings).expect("sweep"))
    });
}

fn fit(c: &mut Criterion) {
    let s = ModeScenario::cooling();
    let data = s.sweep(&linspace(-1.0, -0.05, 20));
    let fixed = s.fixed();
    c.bench_function("fit_sweep_pinned_tau", |b| {
        b.iter(|| fit_detuning_sweep_pinned(&data, fixed, Pinned::TauT(s.tau_t)).expect("fit"))
    });
}

criterion_group!(benches, sweep, fit);
criterion_main!(benches);
