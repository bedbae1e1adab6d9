//! Physical parameters of the optomechanical system.
//!
//! Every quantity is stored in the unit it is entered in (frequencies in Hz,
//! detuning as a fraction of the cavity decay rate) and exposed in SI with
//! angular frequencies through accessors. Keeping the stored form identical to
//! the configuration form makes the config round trip exact; all computation
//! goes through the rad/s accessors.

use std::f64::consts::TAU;

use num_complex::Complex64;

use crate::error::{invalid, Result};

/// CODATA 2018 exact/recommended values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    /// Reduced Planck constant, J·s.
    pub hbar: f64,
    /// Boltzmann constant, J/K.
    pub k_b: f64,
    /// Speed of light in vacuum, m/s.
    pub c: f64,
}

pub const CONSTANTS: PhysicalConstants = PhysicalConstants {
    hbar: 1.054_571_817e-34,
    k_b: 1.380_649e-23,
    c: 299_792_458.0,
};

pub const HBAR: f64 = CONSTANTS.hbar;
pub const K_B: f64 = CONSTANTS.k_b;

fn positive(name: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(invalid(name, format!("must be finite and > 0, got {value}")))
    }
}

fn non_negative(name: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() && value >= 0.0 {
        Ok(value)
    } else {
        Err(invalid(name, format!("must be finite and >= 0, got {value}")))
    }
}

fn finite(name: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(invalid(name, format!("must be finite, got {value}")))
    }
}

/// The third-sound oscillator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MechanicalMode {
    frequency_hz: f64,
    linewidth_hz: f64,
    m_eff: f64,
    temperature: f64,
}

impl MechanicalMode {
    /// `frequency_hz` = ω_m/2π, `linewidth_hz` = Γ_m/2π (energy decay rate).
    pub fn from_hz(frequency_hz: f64, linewidth_hz: f64, m_eff: f64, temperature: f64) -> Result<Self> {
        Ok(Self {
            frequency_hz: positive("omega_m_hz", frequency_hz)?,
            linewidth_hz: positive("gamma_m_hz", linewidth_hz)?,
            m_eff: positive("m_eff_kg", m_eff)?,
            temperature: non_negative("temperature_k", temperature)?,
        })
    }

    pub fn new(omega_m: f64, gamma_m: f64, m_eff: f64, temperature: f64) -> Result<Self> {
        Self::from_hz(omega_m / TAU, gamma_m / TAU, m_eff, temperature)
    }

    pub fn frequency_hz(&self) -> f64 {
        self.frequency_hz
    }

    pub fn linewidth_hz(&self) -> f64 {
        self.linewidth_hz
    }

    pub fn omega_m(&self) -> f64 {
        TAU * self.frequency_hz
    }

    pub fn gamma_m(&self) -> f64 {
        TAU * self.linewidth_hz
    }

    pub fn m_eff(&self) -> f64 {
        self.m_eff
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn quality_factor(&self) -> f64 {
        self.frequency_hz / self.linewidth_hz
    }

    pub fn spring_constant(&self) -> f64 {
        self.m_eff * self.omega_m() * self.omega_m()
    }

    pub fn zero_point_motion(&self) -> f64 {
        zero_point_motion(self)
    }

    /// Equipartition displacement variance k_B·T/k, m².
    pub fn thermal_variance(&self) -> f64 {
        K_B * self.temperature / self.spring_constant()
    }

    pub fn with_temperature(&self, temperature: f64) -> Result<Self> {
        Self::from_hz(self.frequency_hz, self.linewidth_hz, self.m_eff, temperature)
    }

    pub fn with_linewidth_hz(&self, linewidth_hz: f64) -> Result<Self> {
        Self::from_hz(self.frequency_hz, linewidth_hz, self.m_eff, self.temperature)
    }
}

/// Optical cavity with input coupling κ_in, intrinsic loss κ_0 and the
/// effective (displacement-corrected) detuning Δ. Negative Δ is red detuning.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpticalCavity {
    kappa_in_hz: f64,
    kappa_0_hz: f64,
    detuning_over_kappa: f64,
}

impl OpticalCavity {
    pub fn from_hz(kappa_in_hz: f64, kappa_0_hz: f64, detuning_over_kappa: f64) -> Result<Self> {
        Ok(Self {
            kappa_in_hz: positive("kappa_in_hz", kappa_in_hz)?,
            kappa_0_hz: non_negative("kappa_0_hz", kappa_0_hz)?,
            detuning_over_kappa: finite("detuning_over_kappa", detuning_over_kappa)?,
        })
    }

    /// Critically coupled cavity (κ_in = κ_0 = κ/2).
    pub fn critically_coupled(kappa_hz: f64, detuning_over_kappa: f64) -> Result<Self> {
        Self::from_hz(kappa_hz / 2.0, kappa_hz / 2.0, detuning_over_kappa)
    }

    pub fn kappa_in_hz(&self) -> f64 {
        self.kappa_in_hz
    }

    pub fn kappa_0_hz(&self) -> f64 {
        self.kappa_0_hz
    }

    pub fn kappa_in(&self) -> f64 {
        TAU * self.kappa_in_hz
    }

    pub fn kappa_0(&self) -> f64 {
        TAU * self.kappa_0_hz
    }

    /// κ = κ_in + κ_0, rad/s.
    pub fn kappa(&self) -> f64 {
        TAU * (self.kappa_in_hz + self.kappa_0_hz)
    }

    pub fn detuning_over_kappa(&self) -> f64 {
        self.detuning_over_kappa
    }

    /// Δ, rad/s.
    pub fn detuning(&self) -> f64 {
        self.detuning_over_kappa * self.kappa()
    }

    pub fn with_detuning_over_kappa(&self, detuning_over_kappa: f64) -> Result<Self> {
        Self::from_hz(self.kappa_in_hz, self.kappa_0_hz, detuning_over_kappa)
    }
}

/// Coherent optical drive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveField {
    power: f64,
    wavelength: f64,
}

impl DriveField {
    pub fn new(power: f64, wavelength: f64) -> Result<Self> {
        Ok(Self {
            power: non_negative("power_w", power)?,
            wavelength: positive("wavelength_m", wavelength)?,
        })
    }

    pub fn power(&self) -> f64 {
        self.power
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    /// Input photon flux |α_in|², photons/s.
    pub fn photon_flux(&self) -> f64 {
        self.power * self.wavelength / (TAU * HBAR * CONSTANTS.c)
    }

    pub fn with_power(&self, power: f64) -> Result<Self> {
        Self::new(power, self.wavelength)
    }
}

/// Dispersive coupling g plus the photothermal force parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhotothermalCoupling {
    g_hz_per_m: f64,
    beta: f64,
    absorption: f64,
    tau_t: f64,
}

impl PhotothermalCoupling {
    pub fn from_hz(g_hz_per_m: f64, beta: f64, absorption: f64, tau_t: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&absorption) {
            return Err(invalid("absorption", format!("must lie in [0, 1], got {absorption}")));
        }
        Ok(Self {
            g_hz_per_m: finite("g_hz_per_m", g_hz_per_m)?,
            beta: finite("beta", beta)?,
            absorption,
            tau_t: non_negative("tau_t_s", tau_t)?,
        })
    }

    pub fn g_hz_per_m(&self) -> f64 {
        self.g_hz_per_m
    }

    /// g, rad/s per m.
    pub fn g(&self) -> f64 {
        TAU * self.g_hz_per_m
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn absorption(&self) -> f64 {
        self.absorption
    }

    /// The product β·A; the only combination the dynamics depend on.
    pub fn beta_a(&self) -> f64 {
        self.beta * self.absorption
    }

    pub fn tau_t(&self) -> f64 {
        self.tau_t
    }

    /// g0 = g·x_zpf, rad/s.
    pub fn g0(&self, mode: &MechanicalMode) -> f64 {
        self.g() * mode.zero_point_motion()
    }
}

/// Complete parameter set of one run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    pub mode: MechanicalMode,
    pub cavity: OpticalCavity,
    pub drive: DriveField,
    pub coupling: PhotothermalCoupling,
}

impl SystemParams {
    pub fn with_detuning_over_kappa(&self, detuning_over_kappa: f64) -> Result<Self> {
        Ok(Self {
            cavity: self.cavity.with_detuning_over_kappa(detuning_over_kappa)?,
            ..*self
        })
    }

    pub fn with_power(&self, power: f64) -> Result<Self> {
        Ok(Self {
            drive: self.drive.with_power(power)?,
            ..*self
        })
    }

    pub fn with_mode(&self, mode: MechanicalMode) -> Self {
        Self { mode, ..*self }
    }

    /// Steady-state intracavity amplitude for this parameter set.
    pub fn intracavity_amplitude(&self) -> Complex64 {
        intracavity_amplitude(&self.cavity, &self.drive)
    }

    /// Intracavity photon number |α|².
    pub fn photon_number(&self) -> f64 {
        self.intracavity_amplitude().norm_sqr()
    }

    /// g0²·|α|², rad²/s²: the cooperativity-like scale that sets the size of
    /// every backaction term.
    pub fn coupling_strength(&self) -> f64 {
        let g0 = self.coupling.g0(&self.mode);
        g0 * g0 * self.photon_number()
    }
}

/// α = √(2κ_in)·α_in/(κ − iΔ), with α_in = √(photon flux) real.
pub fn intracavity_amplitude(cavity: &OpticalCavity, drive: &DriveField) -> Complex64 {
    let alpha_in = drive.photon_flux().sqrt();
    let numerator = (2.0 * cavity.kappa_in()).sqrt() * alpha_in;
    Complex64::new(numerator, 0.0) / Complex64::new(cavity.kappa(), -cavity.detuning())
}

/// x_zpf = √(ħ/(2·m_eff·ω_m)).
pub fn zero_point_motion(mode: &MechanicalMode) -> f64 {
    (HBAR / (2.0 * mode.m_eff() * mode.omega_m())).sqrt()
}
