use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rustfft::FftPlanner;

use super::*;
use crate::model::{intracavity_amplitude, DriveField, MechanicalMode, OpticalCavity, PhotothermalCoupling};

fn device_like(ratio: f64, beta: f64, tau_t: f64) -> SystemParams {
    SystemParams {
        mode: MechanicalMode::from_hz(482e3, 106.0, 1e-15, 0.53).unwrap(),
        cavity: OpticalCavity::critically_coupled(22.3e6, ratio).unwrap(),
        drive: DriveField::new(200e-9, 1555.1e-9).unwrap(),
        coupling: PhotothermalCoupling::from_hz(2.0e16, beta, 0.5, tau_t).unwrap(),
    }
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

#[test]
fn bare_susceptibility_limits() {
    let mode = MechanicalMode::from_hz(482e3, 106.0, 1e-15, 0.5).unwrap();
    let dc = bare_susceptibility(&mode, 0.0);
    assert_eq!(dc.im, 0.0);
    assert!(rel(dc.re, 1.0 / mode.spring_constant()) < 1e-15);
    let res = bare_susceptibility(&mode, mode.omega_m());
    assert!(res.re.abs() < 1e-12 * res.im.abs());
    assert!(rel(res.norm(), mode.quality_factor() / mode.spring_constant()) < 1e-12);
}

#[test]
fn susceptibility_quadrature_matches_equipartition() {
    // ∫|χ|² dω over (0, ∞) = π/(2 m² ω_m² Γ); with the force PSD 2Γ m k_B T
    // (double-sided in ω) this gives ⟨x²⟩ = k_B T/(m ω_m²).
    let mode = MechanicalMode::from_hz(482e3, 1000.0, 1e-15, 0.5).unwrap();
    let (wm, g, m) = (mode.omega_m(), mode.gamma_m(), mode.m_eff());
    let hi = 40.0 * wm;
    let h = g / 40.0;
    let n = (hi / h).ceil() as usize;
    let mut sum = 0.5 * bare_susceptibility(&mode, 0.0).norm_sqr();
    for i in 1..n {
        sum += bare_susceptibility(&mode, h * i as f64).norm_sqr();
    }
    let integral = sum * h;
    let expected = PI / (2.0 * m * m * wm * wm * g);
    assert!(rel(integral, expected) < 1e-6, "{integral} vs {expected}");
    let variance = 2.0 * g * m * mode.temperature() * crate::model::K_B * integral / PI;
    assert!(rel(variance, mode.thermal_variance()) < 1e-6);
}

#[test]
fn photothermal_filter_limits() {
    let instant = PhotothermalCoupling::from_hz(1e13, -4.0, 0.5, 0.0).unwrap();
    for w in [0.0, 1e3, 1e9] {
        assert_eq!(photothermal_filter(&instant, w), Complex64::new(-1.0, 0.0));
    }
    let slow = PhotothermalCoupling::from_hz(1e13, -4.0, 0.5, 600e-9).unwrap();
    assert!((photothermal_filter(&slow, 1e15) - Complex64::new(1.0, 0.0)).norm() < 1e-8);
}

#[test]
fn kernel_fft_matches_low_pass() {
    // Sample (1/τ)H(t)e^{−t/τ} over [0, 40τ) with a half weight at t = 0 and
    // compare with 1/(1 + iωτ) on [0, 10/τ]. The truncated tail is e^{−40}.
    let tau = 600e-9;
    let n = 1usize << 18;
    let dt = 40.0 * tau / n as f64;
    let mut buf: Vec<Complex64> = (0..n)
        .map(|k| {
            let v = (-(k as f64) * dt / tau).exp() / tau * dt;
            Complex64::new(if k == 0 { 0.5 * v } else { v }, 0.0)
        })
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let df = 1.0 / (n as f64 * dt);
    let coupling = PhotothermalCoupling::from_hz(1e13, 1.0, 1.0, tau).unwrap();
    let mut worst: f64 = 0.0;
    let mut k = 0;
    while TAU * df * k as f64 <= 10.0 / tau {
        let w = TAU * df * k as f64;
        let closed = photothermal_filter(&coupling, w) - 1.0;
        let err = (buf[k] - closed).norm() / closed.norm();
        worst = worst.max(err);
        k += 1;
    }
    assert!(k > 50);
    assert!(worst < 1e-6, "worst relative error {worst:e}");
}

#[test]
fn cavity_response_lower_bound() {
    let c = OpticalCavity::critically_coupled(22.3e6, -0.58).unwrap();
    for w in [-1e9, -c.detuning(), 0.0, c.detuning(), 1e9] {
        assert!(CavityResponse::at(&c, w).value().norm() >= c.kappa());
    }
}

#[test]
fn prefactor_composes_from_amplitude_and_response() {
    let p = device_like(-0.5, -6.0, 600e-9);
    let w = p.mode.omega_m();
    let alpha = intracavity_amplitude(&p.cavity, &p.drive);
    let g0 = p.coupling.g0(&p.mode);
    let d_plus = CavityResponse::at(&p.cavity, w).value();
    let d_minus = CavityResponse::at(&p.cavity, -w).value();
    let product = d_plus * d_minus.conj();
    let expected = 4.0 * g0 * g0 * alpha.norm_sqr() * w * p.cavity.detuning() / product.norm_sqr();
    assert!(rel(prefactor_a(&p, w), expected) < 1e-13);
    assert!(prefactor_a(&p, w) < 0.0);
}

#[test]
fn no_backaction_without_detuning_or_power() {
    let p = device_like(0.0, -6.0, 600e-9);
    let w = p.mode.omega_m();
    assert_eq!(prefactor_a(&p, w), 0.0);
    assert_eq!(delta_omega_m(&p, w), 0.0);
    assert_eq!(delta_gamma_m(&p, w), 0.0);
    assert_eq!(
        effective_susceptibility(&p, 0.9 * w),
        bare_susceptibility(&p.mode, 0.9 * w)
    );
    let dark = device_like(-0.5, -6.0, 600e-9).with_power(0.0).unwrap();
    assert_eq!(delta_omega_m(&dark, w), 0.0);
    assert_eq!(delta_gamma_m(&dark, w), 0.0);
}

#[test]
fn shifts_are_odd_in_detuning() {
    for &beta in &[0.0, 3.0, -6.0, -40.0] {
        for &tau in &[0.0, 1e-8, 600e-9, 1e-5] {
            for &r in &[0.05, 0.3, 0.58, 1.0, 2.7] {
                let red = device_like(-r, beta, tau);
                let blue = device_like(r, beta, tau);
                let w = red.mode.omega_m();
                assert!(rel(delta_omega_m(&red, w), -delta_omega_m(&blue, w)) < 1e-12);
                assert!(rel(delta_gamma_m(&red, w), -delta_gamma_m(&blue, w)) < 1e-12);
                assert!(rel(prefactor_a(&red, w), -prefactor_a(&blue, w)) < 1e-12);
            }
        }
    }
}

#[test]
fn pure_radiation_pressure_red_detuning_cools() {
    let p = device_like(-0.58, 0.0, 600e-9);
    let w = p.mode.omega_m();
    let a = prefactor_a(&p, w);
    assert!(rel(delta_gamma_m(&p, w), -2.0 * a * p.cavity.kappa()) < 1e-14);
    let k = p.cavity.kappa().powi(2) + p.cavity.detuning().powi(2) - w * w;
    assert!(rel(delta_omega_m(&p, w), a * k / (2.0 * w)) < 1e-14);
    assert!(delta_gamma_m(&p, w) > 0.0);
}

#[test]
fn strong_negative_photothermal_heats_at_red_detuning() {
    let p = device_like(-0.58, -60.0, 600e-9);
    assert!(delta_gamma_m(&p, p.mode.omega_m()) < 0.0);
}

#[test]
fn instantaneous_limit_rescales_coupling() {
    // τ_t → 0 is the pure dispersive result with g0² → g0²(1 + β·A).
    for &beta in &[-30.0, -6.0, 0.5, 8.0] {
        for &r in &[-1.3, -0.58, 0.2] {
            let p = device_like(r, beta, 1e-18);
            let bare = device_like(r, 0.0, 0.0);
            let w = p.mode.omega_m();
            let scale = 1.0 + p.coupling.beta_a();
            assert!(rel(delta_gamma_m(&p, w), scale * delta_gamma_m(&bare, w)) < 1e-9);
            assert!(rel(delta_omega_m(&p, w), scale * delta_omega_m(&bare, w)) < 1e-9);
        }
    }
}

#[test]
fn effective_susceptibility_peak_sits_at_shifted_frequency() {
    let p = device_like(-0.6, -6.0, 600e-9);
    let wm = p.mode.omega_m();
    let dw = delta_omega_m(&p, wm);
    let step = 2e-3 * TAU;
    let (mut best_w, mut best) = (0.0, 0.0);
    for i in -400_000..=400_000 {
        let w = wm + dw + step * i as f64 * 0.01;
        let v = effective_susceptibility(&p, w).norm_sqr();
        if v > best {
            best = v;
            best_w = w;
        }
    }
    // Real part of χ′⁻¹ vanishes at ω ≈ ω_m + δω; damping moves the |χ′|²
    // maximum only at order Γ²/ω_m.
    let g_eff = p.mode.gamma_m() + delta_gamma_m(&p, wm);
    let tolerance = g_eff * g_eff / wm + step;
    assert!((best_w - (wm + dw)).abs() < tolerance, "{} vs {}", best_w, wm + dw);
}

#[test]
fn effective_linewidth_is_fwhm() {
    for ratio in [-0.58, -0.2, 0.0] {
        let p = device_like(ratio, 0.02, 600e-9);
        let wm = p.mode.omega_m();
        let g_eff = p.mode.gamma_m() + delta_gamma_m(&p, wm);
        assert!(wm / g_eff > 1000.0);
        let centre = wm + delta_omega_m(&p, wm);
        let psd = |w: f64| w * w * effective_susceptibility(&p, w).norm_sqr();
        let peak = psd(centre);
        let half_point = |dir: f64| {
            let (mut a, mut b) = (centre, centre + dir * 20.0 * g_eff);
            for _ in 0..200 {
                let mid = 0.5 * (a + b);
                if psd(mid) > 0.5 * peak {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            0.5 * (a + b)
        };
        let fwhm = half_point(1.0) - half_point(-1.0);
        assert!(rel(fwhm, g_eff) < 0.01, "fwhm {fwhm} vs {g_eff}");
    }
}

#[test]
fn sweep_at_zero_detuning_is_inert() {
    let p = device_like(-0.3, -6.0, 600e-9);
    for pt in detuning_sweep(&p, &[0.0, 0.0, 0.0]).unwrap() {
        assert_eq!(pt.delta_omega, 0.0);
        assert_eq!(pt.delta_gamma, 0.0);
        assert_eq!(pt.temperature_ratio, Some(1.0));
        assert_eq!(pt.effective_gamma, p.mode.gamma_m());
    }
}

#[test]
fn symmetric_sweep_has_odd_columns() {
    let p = device_like(0.0, -6.0, 600e-9);
    let ratios = linspace(-1.5, 1.5, 31);
    let pts = detuning_sweep(&p, &ratios).unwrap();
    for i in 0..pts.len() {
        let j = pts.len() - 1 - i;
        assert_eq!(pts[i].detuning_over_kappa, -pts[j].detuning_over_kappa);
        assert!(rel(pts[i].delta_gamma, -pts[j].delta_gamma) < 1e-12);
        assert!(rel(pts[i].delta_omega, -pts[j].delta_omega) < 1e-12);
    }
}

#[test]
fn sweep_recomputes_photon_number_per_point() {
    let p = device_like(0.0, 0.0, 0.0);
    let model = BackactionModel::from_params(&p);
    for r in [-2.0, -0.58, 0.4] {
        let q = p.with_detuning_over_kappa(r).unwrap();
        let direct = q.coupling_strength();
        assert!(rel(model.coupling_at(q.cavity.detuning()), direct) < 1e-13);
        let s = model.shifts_at_ratio(r);
        assert!(rel(s.delta_gamma, delta_gamma_m(&q, q.mode.omega_m())) < 1e-13);
    }
}

#[test]
fn instability_has_no_temperature() {
    let mut p = device_like(-0.58, -60.0, 600e-9);
    p.drive = p.drive.with_power(50e-6).unwrap();
    let pt = backaction_point(&p);
    assert!(pt.effective_gamma <= 0.0);
    assert_eq!(pt.temperature_ratio, None);
}

#[test]
fn linspace_endpoints() {
    assert_eq!(linspace(-1.0, 0.0, 41).len(), 41);
    assert_eq!(linspace(-1.0, 0.0, 41)[40], 0.0);
    assert_eq!(linspace(2.0, 3.0, 1), vec![2.0]);
    assert!(linspace(0.0, 1.0, 0).is_empty());
}
