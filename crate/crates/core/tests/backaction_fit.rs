use std::f64::consts::TAU;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thirdsound_core::backaction::{
    fit_detuning_sweep, fit_detuning_sweep_pinned, linspace, BackactionModel, FitFixed, Pinned, SweepSample,
};
use thirdsound_core::scenarios::ModeScenario;
use thirdsound_core::{Error, FitError};

fn generator(beta_a: f64) -> (BackactionModel, FitFixed) {
    let fixed = FitFixed {
        kappa: TAU * 22.3e6,
        omega_m: TAU * 482e3,
        gamma_0: TAU * 115.0,
    };
    let model = BackactionModel {
        kappa: fixed.kappa,
        omega_m: fixed.omega_m,
        coupling_scale: 1.5e10,
        beta_a,
        tau_t: 600e-9,
    };
    (model, fixed)
}

fn synth(model: &BackactionModel, fixed: &FitFixed, ratios: &[f64]) -> Vec<SweepSample> {
    ratios
        .iter()
        .map(|&r| {
            let s = model.shifts_at_ratio(r);
            SweepSample {
                detuning_over_kappa: r,
                gamma_hz: (fixed.gamma_0 + s.delta_gamma) / TAU,
                gamma_err_hz: None,
                domega_hz: s.delta_omega / TAU,
                domega_err_hz: None,
            }
        })
        .collect()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn all_free_fit_reports_the_degenerate_combination() {
    let (model, fixed) = generator(5.0);
    let data = synth(&model, &fixed, &linspace(-1.0, -0.05, 12));
    match fit_detuning_sweep(&data, fixed) {
        Err(Error::Fit(FitError::Degenerate { combination })) => {
            assert!(combination.contains("ln_tau_t"), "{combination}");
        }
        other => panic!("expected a degeneracy report, got {other:?}"),
    }
}

#[test]
fn noiseless_recovery_with_coupling_pinned() {
    let (model, fixed) = generator(5.0);
    let data = synth(&model, &fixed, &linspace(-1.0, -0.05, 12));
    let fit = fit_detuning_sweep_pinned(&data, fixed, Pinned::CouplingScale(model.coupling_scale)).unwrap();
    assert!(rel(fit.beta_a, 5.0) < 1e-3, "{}", fit.beta_a);
    assert!(rel(fit.tau_t, 600e-9) < 1e-3, "{}", fit.tau_t);
    assert_eq!(fit.coupling_scale, model.coupling_scale);
    assert_eq!(fit.coupling_scale_err, 0.0);
    assert!(fit.residual_norm >= 0.0);
}

#[test]
fn noiseless_recovery_with_tau_pinned() {
    let (model, fixed) = generator(-7.0);
    let data = synth(&model, &fixed, &linspace(-1.2, 1.2, 13));
    let fit = fit_detuning_sweep_pinned(&data, fixed, Pinned::TauT(600e-9)).unwrap();
    assert!(rel(fit.beta_a, -7.0) < 1e-3, "{}", fit.beta_a);
    assert!(rel(fit.coupling_scale, model.coupling_scale) < 1e-3);
}

#[test]
fn noisy_recovery_lands_within_three_standard_errors() {
    let (model, fixed) = generator(5.0);
    let ratios = linspace(-1.0, -0.05, 12);
    let clean = synth(&model, &fixed, &ratios);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let unit = Normal::new(0.0, 1.0).unwrap();
    let mut inside = 0;
    for _ in 0..100 {
        let data: Vec<SweepSample> = clean
            .iter()
            .map(|s| {
                let err = 0.05 * s.gamma_hz;
                SweepSample {
                    gamma_hz: s.gamma_hz + err * unit.sample(&mut rng),
                    gamma_err_hz: Some(err),
                    ..*s
                }
            })
            .collect();
        let fit = fit_detuning_sweep_pinned(&data, fixed, Pinned::CouplingScale(model.coupling_scale)).unwrap();
        let ok_beta = (fit.beta_a - 5.0).abs() < 3.0 * fit.beta_a_err;
        let ok_tau = (fit.tau_t - 600e-9).abs() < 3.0 * fit.tau_t_err;
        if ok_beta && ok_tau {
            inside += 1;
        }
        assert!(fit.beta_a_err >= 0.0 && fit.tau_t_err >= 0.0);
    }
    assert!(inside >= 95, "{inside}/100 within 3σ");
}

#[test]
fn fit_ignores_point_order_and_weight_scale() {
    let (model, fixed) = generator(5.0);
    let mut data = synth(&model, &fixed, &linspace(-1.0, -0.05, 10));
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let unit = Normal::new(0.0, 1.0).unwrap();
    for s in data.iter_mut() {
        s.gamma_hz += 3.0 * unit.sample(&mut rng);
        s.gamma_err_hz = Some(3.0);
        s.domega_hz += 0.5 * unit.sample(&mut rng);
        s.domega_err_hz = Some(0.5);
    }
    let pin = Pinned::CouplingScale(model.coupling_scale);
    let base = fit_detuning_sweep_pinned(&data, fixed, pin).unwrap();
    let mut reversed = data.clone();
    reversed.reverse();
    let rev = fit_detuning_sweep_pinned(&reversed, fixed, pin).unwrap();
    let scaled: Vec<SweepSample> = data
        .iter()
        .map(|s| SweepSample {
            gamma_err_hz: s.gamma_err_hz.map(|e| e * 4.0),
            domega_err_hz: s.domega_err_hz.map(|e| e * 4.0),
            ..*s
        })
        .collect();
    let sc = fit_detuning_sweep_pinned(&scaled, fixed, pin).unwrap();
    for other in [&rev, &sc] {
        assert!(rel(other.beta_a, base.beta_a) < 1e-6);
        assert!(rel(other.tau_t, base.tau_t) < 1e-6);
        assert!(rel(other.beta_a_err, base.beta_a_err) < 1e-4);
    }
}

#[test]
fn too_few_points_rejected() {
    let (model, fixed) = generator(5.0);
    let data = synth(&model, &fixed, &[-0.5, -0.3, -0.1]);
    assert!(matches!(
        fit_detuning_sweep(&data, fixed),
        Err(Error::Fit(FitError::InsufficientData(_)))
    ));
}

#[test]
fn anchored_modes_fit_back_to_their_generators() {
    for s in [ModeScenario::cooling(), ModeScenario::heating()] {
        let data = s.sweep(&linspace(-1.0, 0.0, 21));
        let fit = fit_detuning_sweep_pinned(&data, s.fixed(), Pinned::CouplingScale(s.coupling_scale)).unwrap();
        assert!(rel(fit.tau_t, 600e-9) < 1e-3, "{}: {}", s.name, fit.tau_t);
        assert!(rel(fit.beta_a, s.beta_a) < 1e-3, "{}: {}", s.name, fit.beta_a);
        let ratio = fit.temperature_ratio(-0.58).unwrap();
        assert!(rel(ratio, s.temperature_ratio(-0.58)) < 1e-6);
    }
}
