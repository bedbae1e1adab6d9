//! Shared fixtures for the benchmarks.

use thirdsound_core::model::{DriveField, MechanicalMode, OpticalCavity, PhotothermalCoupling, SystemParams};
use thirdsound_core::scenarios::ModeScenario;
use thirdsound_core::{simulate, SimConfig, SimTrace};

/// A 48.2 kHz, 106 Hz mode with the drive switched off.
pub fn bare_params() -> SystemParams {
    SystemParams {
        mode: MechanicalMode::from_hz(48.2e3, 106.0, 1e-15, 0.53).expect("valid mode"),
        cavity: OpticalCavity::critically_coupled(22.3e6, -0.58).expect("valid cavity"),
        drive: DriveField::new(0.0, 1555.1e-9).expect("valid drive"),
        coupling: PhotothermalCoupling::from_hz(0.0, 0.0, 0.5, 600e-9).expect("valid coupling"),
    }
}

/// The cooling scenario at the anchor detuning, photothermal state included.
pub fn driven_params() -> SystemParams {
    ModeScenario::cooling().system_params(-0.58).expect("valid scenario")
}

pub fn bare_config(duration: f64, sample_rate: f64) -> SimConfig {
    let mut cfg = SimConfig::new(bare_params(), duration, sample_rate, 42);
    cfg.shot_noise_floor = 2e-24;
    cfg
}

pub fn bare_trace(duration: f64, sample_rate: f64) -> SimTrace {
    simulate(&bare_config(duration, sample_rate)).expect("stable bare mode")
}
