use super::*;
use crate::backaction::{backaction_point, bare_susceptibility};
use crate::model::{DriveField, OpticalCavity, PhotothermalCoupling};
use crate::scenarios::ModeScenario;
use crate::spectral::{welch_psd, WelchOptions};

const F_M: f64 = 10e3;
const GAMMA_HZ: f64 = 200.0;
const FS: f64 = 250e3;

fn bare(temperature: f64, power: f64) -> SystemParams {
    SystemParams {
        mode: MechanicalMode::from_hz(F_M, GAMMA_HZ, 1e-15, temperature).unwrap(),
        cavity: OpticalCavity::critically_coupled(22.3e6, -0.5).unwrap(),
        drive: DriveField::new(power, 1555e-9).unwrap(),
        coupling: PhotothermalCoupling::from_hz(2e16, 0.0, 0.5, 600e-9).unwrap(),
    }
}

fn variance(x: &[f64]) -> f64 {
    let m = x.iter().sum::<f64>() / x.len() as f64;
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / x.len() as f64
}

#[test]
fn force_amplitude_scalings() {
    let m = MechanicalMode::from_hz(F_M, GAMMA_HZ, 1e-15, 0.0).unwrap();
    assert_eq!(thermal_force_amplitude(&m), 0.0);
    let a = thermal_force_amplitude(&m.with_temperature(1.0).unwrap());
    let b = thermal_force_amplitude(&m.with_temperature(4.0).unwrap());
    assert!((b / a - 2.0).abs() < 1e-14);
    let c = thermal_force_amplitude(
        &m.with_temperature(1.0)
            .unwrap()
            .with_linewidth_hz(4.0 * GAMMA_HZ)
            .unwrap(),
    );
    assert!((c / a - 2.0).abs() < 1e-14);
    let direct = (2.0 * m.gamma_m() * 1e-15 * K_B).sqrt();
    assert!((a / direct - 1.0).abs() < 1e-14);
}

#[test]
fn cold_dark_quiet_run_is_zero() {
    let cfg = SimConfig::new(bare(0.0, 0.0), 0.01, FS, 3);
    let t = simulate(&cfg).unwrap();
    assert_eq!(t.len(), 2500);
    assert!(t.x.iter().all(|&v| v == 0.0));
    assert!(t.homodyne.iter().all(|&v| v == 0.0));
    assert!(!t.unstable);
}

#[test]
fn discretization_preserves_equipartition_exactly() {
    let p = bare(0.5, 0.0);
    let sim = Simulator::new(&SimConfig::new(p, 1.0, FS, 1)).unwrap();
    assert_eq!(sim.dimension(), 2);
    let v = sim.stationary_variance().unwrap();
    assert!(
        (v / p.mode.thermal_variance() - 1.0).abs() < 1e-9,
        "{}",
        v / p.mode.thermal_variance()
    );
}

#[test]
fn equipartition_over_long_record() {
    let p = bare(0.5, 0.0);
    // 20 s is about 25 000 energy decay times: σ ≈ √(2/(Γ·T)) ≈ 0.9 %.
    let t = simulate(&SimConfig::new(p, 20.0, FS, 11)).unwrap();
    let r = variance(&t.x) / p.mode.thermal_variance();
    assert!((r - 1.0).abs() < 0.05, "{r}");
}

#[test]
fn spectrum_follows_fluctuation_dissipation() {
    let p = bare(0.5, 0.0);
    let t = simulate(&SimConfig::new(p, 60.0, FS, 5)).unwrap();
    let psd = welch_psd(&t.x, FS, &WelchOptions::new(1 << 15)).unwrap();
    assert!(psd.segment_count >= 50);
    let m = &p.mode;
    let analytic = |f: f64| {
        let chi = bare_susceptibility(m, std::f64::consts::TAU * f);
        4.0 * m.gamma_m() * m.m_eff() * K_B * m.temperature() * chi.norm_sqr()
    };
    // 5-bin running mean: scatter ≈ 2 %, curvature bias ≈ 1 % at the peak.
    let idx = psd.band_indices(F_M - 5.0 * GAMMA_HZ, F_M + 5.0 * GAMMA_HZ);
    let mut worst: f64 = 0.0;
    for k in idx {
        let mean = psd.values[k - 2..=k + 2].iter().sum::<f64>() / 5.0;
        let model = (k - 2..=k + 2).map(|j| analytic(psd.frequency(j))).sum::<f64>() / 5.0;
        worst = worst.max((mean / model - 1.0).abs());
    }
    assert!(worst < 0.10, "worst deviation {worst}");
}

#[test]
fn backaction_sets_stationary_energy() {
    for scenario in [ModeScenario::cooling(), ModeScenario::heating()] {
        let p0 = scenario.system_params(0.0).unwrap();
        let p1 = scenario.system_params(crate::scenarios::ANCHOR_DETUNING).unwrap();
        let fs = 25.0 * scenario.frequency_hz;
        let v = |p: SystemParams| {
            Simulator::new(&SimConfig::new(p, 1.0, fs, 0))
                .unwrap()
                .stationary_variance()
                .unwrap()
        };
        let ratio = v(p1) / v(p0);
        let pt = backaction_point(&p1);
        let expected = pt.temperature_ratio.unwrap();
        assert!(
            (ratio / expected - 1.0).abs() < 0.01,
            "{}: {ratio} vs {expected}",
            scenario.name
        );
    }
}

#[test]
fn full_cavity_agrees_with_adiabatic_model() {
    let s = ModeScenario::heating();
    let p = s.system_params(crate::scenarios::ANCHOR_DETUNING).unwrap();
    let adiabatic = Simulator::new(&SimConfig::new(p, 1.0, 25.0 * s.frequency_hz, 0)).unwrap();
    let mut cfg = SimConfig::new(p, 1e-3, 1e9, 0);
    cfg.mode = SimMode::FullCavity;
    let full = Simulator::new(&cfg).unwrap();
    assert_eq!(adiabatic.dimension(), 3);
    assert_eq!(full.dimension(), 5);
    let (a, f) = (
        adiabatic.stationary_variance().unwrap(),
        full.stationary_variance().unwrap(),
    );
    assert!((a / f - 1.0).abs() < 0.01, "{a:e} vs {f:e}");
}

#[test]
fn photothermal_state_relaxes_with_tau() {
    let s = ModeScenario::cooling();
    let mut p = s.system_params(-0.3).unwrap();
    p.mode = p.mode.with_temperature(0.0).unwrap();
    let fs = 200e6;
    let mut sim = Simulator::new(&SimConfig::new(p, 1e-5, fs, 0)).unwrap();
    assert!(sim.has_photothermal_state());
    sim.set_state(&SimState {
        y_pt: 1.0,
        ..SimState::default()
    });
    let (mut xs, mut hs) = (vec![], vec![]);
    let mut pts = vec![];
    for k in 0..600 {
        pts.push((k as f64 / fs, sim.state().y_pt.ln()));
        sim.next_block(1, &mut xs, &mut hs);
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let ml = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let slope =
        pts.iter().map(|p| (p.0 - mt) * (p.1 - ml)).sum::<f64>() / pts.iter().map(|p| (p.0 - mt).powi(2)).sum::<f64>();
    let tau = -1.0 / slope;
    assert!((tau / p.coupling.tau_t() - 1.0).abs() < 0.01, "{tau:e}");
}

#[test]
fn optional_states_are_dropped() {
    let dim = |p: SystemParams| Simulator::new(&SimConfig::new(p, 0.01, FS, 0)).unwrap().dimension();
    assert_eq!(dim(bare(0.5, 0.0)), 2);
    // βA = 0: cavity response only.
    assert_eq!(dim(bare(0.5, 1e-6)), 2);
    let mut p = bare(0.5, 1e-6);
    p.coupling = PhotothermalCoupling::from_hz(2e16, 0.1, 0.5, 600e-9).unwrap();
    assert_eq!(dim(p), 3);
    p.coupling = PhotothermalCoupling::from_hz(2e16, 0.1, 0.5, 0.0).unwrap();
    assert_eq!(dim(p), 2);
}

#[test]
fn replay_and_seed_independence() {
    let mut cfg = SimConfig::new(bare(0.5, 0.0), 0.2, FS, 42);
    cfg.shot_noise_floor = 1e-30;
    let a = simulate(&cfg).unwrap();
    let b = replay(&cfg, &a.config_hash).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.config_hash.len(), 64);

    let other = simulate(&SimConfig { seed: 43, ..cfg }).unwrap();
    let n = a.len() as f64;
    let (sa, so) = (variance(&a.homodyne).sqrt(), variance(&other.homodyne).sqrt());
    // Detection noise is white, so its samples are independent.
    let noise = |t: &SimTrace| t.homodyne.iter().zip(&t.x).map(|(h, x)| h - x).collect::<Vec<f64>>();
    let (na, no) = (noise(&a), noise(&other));
    let cross = na.iter().zip(&no).map(|(p, q)| p * q).sum::<f64>() / n / (variance(&na) * variance(&no)).sqrt();
    assert!(cross.abs() < 3.0 / n.sqrt(), "{cross}");
    assert!(sa > 0.0 && so > 0.0);
    assert_ne!(a.x, other.x);

    let altered = SimConfig {
        shot_noise_floor: 2e-30,
        ..cfg
    };
    assert_ne!(altered.config_hash(), cfg.config_hash());
    assert!(matches!(replay(&altered, &a.config_hash), Err(Error::Config(_))));
}

#[test]
fn shot_noise_floor_is_double_sided() {
    let mut cfg = SimConfig::new(bare(0.0, 0.0), 1.0, FS, 8);
    cfg.shot_noise_floor = 3e-28;
    let t = simulate(&cfg).unwrap();
    let psd = welch_psd(&t.homodyne, FS, &WelchOptions::new(4096)).unwrap();
    let mean = psd.values[1..psd.values.len() - 1].iter().sum::<f64>() / (psd.values.len() - 2) as f64;
    assert!((mean / (2.0 * cfg.shot_noise_floor) - 1.0).abs() < 0.02, "{mean:e}");
}

#[test]
fn blocks_match_single_run() {
    let cfg = SimConfig {
        shot_noise_floor: 1e-30,
        ..SimConfig::new(bare(0.5, 0.0), 0.05, FS, 9)
    };
    let whole = simulate(&cfg).unwrap();
    let mut sim = Simulator::new(&cfg).unwrap();
    let (mut x, mut h) = (vec![], vec![]);
    while sim.remaining() > 0 {
        sim.next_block(997, &mut x, &mut h);
    }
    assert_eq!(x, whole.x);
    assert_eq!(h, whole.homodyne);
}

#[test]
fn coarse_steps_are_refused() {
    let cfg = SimConfig::new(bare(0.5, 0.0), 0.1, 20.0 * F_M, 0);
    assert!(matches!(simulate(&cfg), Err(Error::StepTooCoarse { .. })));
    let mut full = SimConfig::new(bare(0.5, 0.0), 1e-4, 100e6, 0);
    full.mode = SimMode::FullCavity;
    assert!(matches!(simulate(&full), Err(Error::StepTooCoarse { .. })));
    assert!(simulate(&SimConfig::new(bare(0.5, 0.0), -1.0, FS, 0)).is_err());
}

#[test]
fn instability_truncates_and_flags() {
    let s = ModeScenario::heating();
    let p = s.system_params(crate::scenarios::ANCHOR_DETUNING).unwrap();
    let p = p.with_power(100.0 * p.drive.power()).unwrap();
    assert!(backaction_point(&p).effective_gamma < -1e4);
    let cfg = SimConfig::new(p, 0.1, 25.0 * s.frequency_hz, 1);
    let sim = Simulator::new(&cfg).unwrap();
    assert!(sim.stationary_variance().is_none());
    let t = simulate(&cfg).unwrap();
    assert!(t.unstable);
    assert!(t.len() < cfg.sample_count());
    assert!(t.x.iter().all(|v| v.is_finite()));
}

#[test]
fn euler_maruyama_converges_for_low_q() {
    // Q = 5 at 1000 samples per period: ω²·dt/Γ ≈ 0.03.
    let mut p = bare(0.5, 0.0);
    p.mode = MechanicalMode::from_hz(1e3, 200.0, 1e-15, 0.5).unwrap();
    let mut cfg = SimConfig::new(p, 20.0, 1e6, 2);
    cfg.integrator = Integrator::EulerMaruyama;
    let t = simulate(&cfg).unwrap();
    let r = variance(&t.x) / p.mode.thermal_variance();
    assert!((r - 1.0).abs() < 0.08, "{r}");
}
