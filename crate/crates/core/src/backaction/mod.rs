//! Frequency-domain dynamical backaction from combined radiation-pressure and
//! photothermal forces.
//!
//! The optical force on the oscillator is proportional to the intracavity
//! amplitude fluctuation δX⁺, which responds to motion through the cavity
//! transfer function D(ω) = κ + i(ω − Δ). The photothermal part adds a copy of
//! that force, scaled by β·A and low-pass filtered with the thermal time
//! constant τ_t. Eliminating the field gives a modified susceptibility
//!
//! ```text
//! χ′(ω)⁻¹ = m_eff (ω_m² + 2ω δω_m − ω² + iω [Γ_m + δΓ_m])
//! ```
//!
//! with δω_m and δΓ_m given by [`delta_omega_m`] and [`delta_gamma_m`]. Both are
//! evaluated at the bare mechanical frequency: the shifts are tens of hertz
//! against hundreds of kilohertz, so self-consistent evaluation at the shifted
//! frequency changes nothing measurable.

mod fit;

use std::f64::consts::TAU;

use num_complex::Complex64;

use crate::model::{MechanicalMode, OpticalCavity, PhotothermalCoupling, SystemParams};

pub use fit::{fit_detuning_sweep, fit_detuning_sweep_pinned, BackactionFit, FitFixed, Pinned, SweepSample};

/// D(ω) = κ + i(ω − Δ).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CavityResponse(pub Complex64);

impl CavityResponse {
    pub fn at(cavity: &OpticalCavity, omega: f64) -> Self {
        Self(Complex64::new(cavity.kappa(), omega - cavity.detuning()))
    }

    pub fn value(&self) -> Complex64 {
        self.0
    }
}

/// χ(ω) = 1/(m_eff (ω_m² − ω² + iωΓ_m)).
pub fn bare_susceptibility(mode: &MechanicalMode, omega: f64) -> Complex64 {
    let wm = mode.omega_m();
    Complex64::new(1.0, 0.0)
        / Complex64::new(
            mode.m_eff() * (wm * wm - omega * omega),
            mode.m_eff() * omega * mode.gamma_m(),
        )
}

/// 1 + β·A/(1 + iωτ_t): the photothermal enhancement of the optical force.
pub fn photothermal_filter(coupling: &PhotothermalCoupling, omega: f64) -> Complex64 {
    Complex64::new(1.0, 0.0) + coupling.beta_a() / Complex64::new(1.0, omega * coupling.tau_t())
}

/// Backaction parameters reduced to the five numbers the shifts depend on.
///
/// `coupling_scale` is g0²·|α|² evaluated on resonance (Δ = 0). At fixed
/// input power the photon number at detuning Δ is
/// `coupling_scale·κ²/(κ² + Δ²)/g0²`, so this one scale replaces g, the
/// power, the wavelength and the coupling split.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BackactionModel {
    /// κ, rad/s.
    pub kappa: f64,
    /// ω_m, rad/s.
    pub omega_m: f64,
    /// g0²·|α(Δ=0)|², rad²/s².
    pub coupling_scale: f64,
    pub beta_a: f64,
    /// τ_t, s.
    pub tau_t: f64,
}

/// δω_m and δΓ_m, rad/s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Shifts {
    pub delta_omega: f64,
    pub delta_gamma: f64,
}

impl BackactionModel {
    pub fn from_params(params: &SystemParams) -> Self {
        let kappa = params.cavity.kappa();
        let g0 = params.coupling.g0(&params.mode);
        let on_resonance = 2.0 * params.cavity.kappa_in() * params.drive.photon_flux() / (kappa * kappa);
        Self {
            kappa,
            omega_m: params.mode.omega_m(),
            coupling_scale: g0 * g0 * on_resonance,
            beta_a: params.coupling.beta_a(),
            tau_t: params.coupling.tau_t(),
        }
    }

    /// g0²|α|² at detuning Δ (rad/s) for fixed input power.
    pub fn coupling_at(&self, detuning: f64) -> f64 {
        let k2 = self.kappa * self.kappa;
        self.coupling_scale * k2 / (k2 + detuning * detuning)
    }

    /// Shifts at detuning Δ (rad/s), probing frequency ω.
    pub fn shifts(&self, detuning: f64, omega: f64) -> Shifts {
        shifts_from(
            self.kappa,
            detuning,
            self.omega_m,
            omega,
            self.coupling_at(detuning),
            self.beta_a,
            self.tau_t,
        )
    }

    pub fn shifts_at_ratio(&self, detuning_over_kappa: f64) -> Shifts {
        self.shifts(detuning_over_kappa * self.kappa, self.omega_m)
    }
}

/// A(ω) = 4 g0²|α|² ω_m Δ / |D(ω)D*(−ω)|².
///
/// Dimensionless: δω_m and δΓ_m are A(ω) times brackets with units of rad/s.
fn prefactor(kappa: f64, detuning: f64, omega_m: f64, omega: f64, g0_sq_n: f64) -> f64 {
    let k = kappa * kappa + detuning * detuning - omega * omega;
    let den = k * k + 4.0 * kappa * kappa * omega * omega;
    4.0 * g0_sq_n * omega_m * detuning / den
}

fn shifts_from(kappa: f64, detuning: f64, omega_m: f64, omega: f64, g0_sq_n: f64, beta_a: f64, tau_t: f64) -> Shifts {
    let a = prefactor(kappa, detuning, omega_m, omega, g0_sq_n);
    let k = kappa * kappa + detuning * detuning - omega * omega;
    let pt = beta_a / (1.0 + omega * omega * tau_t * tau_t);
    Shifts {
        delta_omega: a / (2.0 * omega_m) * (k * (1.0 + pt) - 2.0 * kappa * omega * omega * tau_t * pt),
        delta_gamma: -a * (k * tau_t * pt + 2.0 * kappa * (1.0 + pt)),
    }
}

fn g0_sq_n(params: &SystemParams) -> f64 {
    params.coupling_strength()
}

/// The signed prefactor A(ω); zero exactly when Δ = 0 or the drive is off.
pub fn prefactor_a(params: &SystemParams, omega: f64) -> f64 {
    prefactor(
        params.cavity.kappa(),
        params.cavity.detuning(),
        params.mode.omega_m(),
        omega,
        g0_sq_n(params),
    )
}

fn shifts(params: &SystemParams, omega: f64) -> Shifts {
    shifts_from(
        params.cavity.kappa(),
        params.cavity.detuning(),
        params.mode.omega_m(),
        omega,
        g0_sq_n(params),
        params.coupling.beta_a(),
        params.coupling.tau_t(),
    )
}

/// Optical spring δω_m, rad/s.
pub fn delta_omega_m(params: &SystemParams, omega: f64) -> f64 {
    shifts(params, omega).delta_omega
}

/// Optical damping δΓ_m, rad/s. Positive means extra damping (cooling).
pub fn delta_gamma_m(params: &SystemParams, omega: f64) -> f64 {
    shifts(params, omega).delta_gamma
}

/// χ′(ω) with δω_m, δΓ_m evaluated at ω_m.
///
/// The frequency-pulling term is implemented as 2ω·δω_m, the form the
/// modified susceptibility is written in; 2ω_m·δω_m differs only at
/// second order in δω_m/ω_m.
pub fn effective_susceptibility(params: &SystemParams, omega: f64) -> Complex64 {
    let mode = &params.mode;
    let s = shifts(params, mode.omega_m());
    let wm = mode.omega_m();
    let m = mode.m_eff();
    Complex64::new(1.0, 0.0)
        / Complex64::new(
            m * (wm * wm + 2.0 * omega * s.delta_omega - omega * omega),
            m * omega * (mode.gamma_m() + s.delta_gamma),
        )
}

/// One row of a detuning sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BackactionPoint {
    pub detuning_over_kappa: f64,
    /// rad/s
    pub delta_omega: f64,
    /// rad/s
    pub delta_gamma: f64,
    /// Γ_m + δΓ_m, rad/s
    pub effective_gamma: f64,
    /// Γ_m/Γ_eff = T_Δ/T_0. `None` past the parametric-instability threshold
    /// (Γ_eff ≤ 0), where no steady-state temperature exists.
    pub temperature_ratio: Option<f64>,
}

impl BackactionPoint {
    pub fn delta_omega_hz(&self) -> f64 {
        self.delta_omega / TAU
    }

    pub fn delta_gamma_hz(&self) -> f64 {
        self.delta_gamma / TAU
    }

    pub fn effective_gamma_hz(&self) -> f64 {
        self.effective_gamma / TAU
    }
}

pub fn backaction_point(params: &SystemParams) -> BackactionPoint {
    let s = shifts(params, params.mode.omega_m());
    let gamma_m = params.mode.gamma_m();
    let effective_gamma = gamma_m + s.delta_gamma;
    BackactionPoint {
        detuning_over_kappa: params.cavity.detuning_over_kappa(),
        delta_omega: s.delta_omega,
        delta_gamma: s.delta_gamma,
        effective_gamma,
        temperature_ratio: (effective_gamma > 0.0).then(|| gamma_m / effective_gamma),
    }
}

/// Evaluates the backaction at each detuning (in units of κ), holding the
/// input power fixed so |α|² is recomputed at every point.
pub fn detuning_sweep(params: &SystemParams, detunings: &[f64]) -> crate::Result<Vec<BackactionPoint>> {
    detunings
        .iter()
        .map(|&r| Ok(backaction_point(&params.with_detuning_over_kappa(r)?)))
        .collect()
}

/// `count` evenly spaced values from `start` to `stop` inclusive.
pub fn linspace(start: f64, stop: f64, count: usize) -> Vec<f64> {
    match count {
        0 => vec![],
        1 => vec![start],
        _ => {
            // Weighted form keeps sweeps symmetric about zero exactly.
            let n = (count - 1) as f64;
            (0..count)
                .map(|i| ((n - i as f64) * start + i as f64 * stop) / n)
                .collect()
        }
    }
}

#[cfg(test)]
mod tests;
