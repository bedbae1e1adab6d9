//! Flat `key = value` parameter files.
//!
//! The format is a flat TOML table with exactly the fourteen keys below.
//! Unknown or missing keys are rejected. Floats are written with the shortest
//! representation that parses back to the same bits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DriveField, MechanicalMode, OpticalCavity, PhotothermalCoupling, SystemParams};

/// On-disk layout; field names are the config keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    omega_m_hz: f64,
    gamma_m_hz: f64,
    m_eff_kg: f64,
    temperature_k: f64,
    kappa_in_hz: f64,
    kappa_0_hz: f64,
    detuning_over_kappa: f64,
    power_w: f64,
    wavelength_m: f64,
    g_hz_per_m: f64,
    beta: f64,
    absorption: f64,
    tau_t_s: f64,
    seed: u64,
}

pub const CONFIG_KEYS: [&str; 14] = [
    "omega_m_hz",
    "gamma_m_hz",
    "m_eff_kg",
    "temperature_k",
    "kappa_in_hz",
    "kappa_0_hz",
    "detuning_over_kappa",
    "power_w",
    "wavelength_m",
    "g_hz_per_m",
    "beta",
    "absorption",
    "tau_t_s",
    "seed",
];

/// A parameter set together with the run seed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Config {
    pub params: SystemParams,
    pub seed: u64,
}

impl Config {
    pub fn new(params: SystemParams, seed: u64) -> Self {
        Self { params, seed }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let file: ConfigFile = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        let params = SystemParams {
            mode: MechanicalMode::from_hz(file.omega_m_hz, file.gamma_m_hz, file.m_eff_kg, file.temperature_k)?,
            cavity: OpticalCavity::from_hz(file.kappa_in_hz, file.kappa_0_hz, file.detuning_over_kappa)?,
            drive: DriveField::new(file.power_w, file.wavelength_m)?,
            coupling: PhotothermalCoupling::from_hz(file.g_hz_per_m, file.beta, file.absorption, file.tau_t_s)?,
        };
        Ok(Self {
            params,
            seed: file.seed,
        })
    }

    /// Canonical text form, one key per line in [`CONFIG_KEYS`] order.
    pub fn to_text(&self) -> String {
        let p = &self.params;
        let values: [String; 14] = [
            fmt_f64(p.mode.frequency_hz()),
            fmt_f64(p.mode.linewidth_hz()),
            fmt_f64(p.mode.m_eff()),
            fmt_f64(p.mode.temperature()),
            fmt_f64(p.cavity.kappa_in_hz()),
            fmt_f64(p.cavity.kappa_0_hz()),
            fmt_f64(p.cavity.detuning_over_kappa()),
            fmt_f64(p.drive.power()),
            fmt_f64(p.drive.wavelength()),
            fmt_f64(p.coupling.g_hz_per_m()),
            fmt_f64(p.coupling.beta()),
            fmt_f64(p.coupling.absorption()),
            fmt_f64(p.coupling.tau_t()),
            self.seed.to_string(),
        ];
        let mut out = String::new();
        for (key, value) in CONFIG_KEYS.iter().zip(values.iter()) {
            out.push_str(key);
            out.push_str(" = ");
            out.push_str(value);
            out.push('\n');
        }
        out
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }
}

/// Shortest round-trip float formatting in a TOML-valid spelling: always
/// carries a `.` or exponent so integers-valued floats stay floats. Negative
/// zero prints as `0.0`.
pub fn fmt_f64(value: f64) -> String {
    let value = if value == 0.0 { 0.0 } else { value };
    let s = format!("{value:?}");
    if s.contains(['.', 'e', 'E']) || s.contains("inf") || s.contains("NaN") {
        s
    } else {
        format!("{s}.0")
    }
}
