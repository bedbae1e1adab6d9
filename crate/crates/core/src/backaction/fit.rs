//! Joint fit of measured linewidth and frequency-shift sweeps.
//!
//! Free parameters are (β·A, τ_t, coupling scale); κ, ω_m and Γ_0 are held
//! fixed. β and A enter only as a product, so they are fitted as one.
//!
//! With every point probed at the same ω_m, the shifts depend on the three
//! parameters only through C·(1 + β·A·L) and C·τ_t·β·A·L, where
//! L = 1/(1 + ω_m²τ_t²) and C is the coupling scale. A fit with all three free
//! is therefore degenerate and is reported as such; pin either the coupling
//! scale (from an independent g0 and power calibration) or τ_t with
//! [`Pinned`] to make the remaining two identifiable.
//! Internally τ_t and the coupling scale are optimized in log space. The
//! objective has separate basins for positive and negative β·A, so the
//! Levenberg-Marquardt runs are seeded from a coarse grid; the coupling scale
//! enters linearly and is solved in closed form at each grid node.

use std::f64::consts::TAU;

use crate::backaction::BackactionModel;
use crate::error::{FitError, Result};
use crate::lsq::{solve, LmOptions, LmReport, Problem};

/// One measured sweep point. Linewidths and shifts are in Hz (Γ/2π, δω/2π).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepSample {
    pub detuning_over_kappa: f64,
    pub gamma_hz: f64,
    pub gamma_err_hz: Option<f64>,
    pub domega_hz: f64,
    pub domega_err_hz: Option<f64>,
}

/// Quantities known independently of the sweep, rad/s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitFixed {
    pub kappa: f64,
    pub omega_m: f64,
    pub gamma_0: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BackactionFit {
    pub beta_a: f64,
    /// s
    pub tau_t: f64,
    /// g0²·|α(Δ=0)|², rad²/s²
    pub coupling_scale: f64,
    pub residual_norm: f64,
    pub reduced_chi2: f64,
    pub beta_a_err: f64,
    pub tau_t_err: f64,
    pub coupling_scale_err: f64,
    pub iterations: usize,
    pub fixed: FitFixed,
}

impl BackactionFit {
    pub fn model(&self) -> BackactionModel {
        model(&self.fixed, self.beta_a, self.tau_t, self.coupling_scale)
    }

    /// Γ_0/Γ(Δ): the mode temperature ratio predicted by the fit.
    pub fn temperature_ratio(&self, detuning_over_kappa: f64) -> Option<f64> {
        let g = self.fixed.gamma_0 + self.model().shifts_at_ratio(detuning_over_kappa).delta_gamma;
        (g > 0.0).then(|| self.fixed.gamma_0 / g)
    }
}

fn model(fixed: &FitFixed, beta_a: f64, tau_t: f64, coupling_scale: f64) -> BackactionModel {
    BackactionModel {
        kappa: fixed.kappa,
        omega_m: fixed.omega_m,
        coupling_scale,
        beta_a,
        tau_t,
    }
}

const NAMES: [&str; 3] = ["beta_a", "ln_tau_t", "ln_coupling_scale"];

/// A parameter held at a known value during the fit.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Pinned {
    #[default]
    Nothing,
    /// g0²·|α(Δ=0)|², rad²/s²
    CouplingScale(f64),
    /// τ_t, s
    TauT(f64),
}

struct Weighted {
    ratio: f64,
    gamma: f64,
    gamma_w: f64,
    domega: f64,
    domega_w: f64,
}

fn weights(data: &[SweepSample]) -> Result<Vec<Weighted>> {
    data.iter()
        .map(|s| {
            let w = |err: Option<f64>, name: &str| -> Result<f64> {
                match err {
                    None => Ok(1.0),
                    Some(e) if e > 0.0 && e.is_finite() => Ok(1.0 / e),
                    Some(e) => {
                        Err(FitError::InsufficientData(format!("{name} uncertainty must be > 0, got {e}")).into())
                    }
                }
            };
            Ok(Weighted {
                ratio: s.detuning_over_kappa,
                gamma: s.gamma_hz,
                gamma_w: w(s.gamma_err_hz, "gamma")?,
                domega: s.domega_hz,
                domega_w: w(s.domega_err_hz, "domega")?,
            })
        })
        .collect()
}

fn residuals(fixed: &FitFixed, data: &[Weighted], beta_a: f64, tau_t: f64, scale: f64, out: &mut [f64]) {
    let m = model(fixed, beta_a, tau_t, scale);
    for (i, d) in data.iter().enumerate() {
        let s = m.shifts_at_ratio(d.ratio);
        out[2 * i] = d.gamma_w * ((fixed.gamma_0 + s.delta_gamma) / TAU - d.gamma);
        out[2 * i + 1] = d.domega_w * (s.delta_omega / TAU - d.domega);
    }
}

/// Best coupling scale at fixed (β·A, τ_t) by weighted linear least squares,
/// and the resulting cost. `None` if the optimum is non-positive.
fn profile_scale(fixed: &FitFixed, data: &[Weighted], beta_a: f64, tau_t: f64) -> Option<(f64, f64)> {
    let unit = model(fixed, beta_a, tau_t, 1.0);
    let (mut num, mut den) = (0.0, 0.0);
    let basis: Vec<(f64, f64)> = data
        .iter()
        .map(|d| {
            let s = unit.shifts_at_ratio(d.ratio);
            (s.delta_gamma / TAU, s.delta_omega / TAU)
        })
        .collect();
    for (d, (ug, uw)) in data.iter().zip(basis.iter()) {
        let wg2 = d.gamma_w * d.gamma_w;
        let ww2 = d.domega_w * d.domega_w;
        num += wg2 * ug * (d.gamma - fixed.gamma_0 / TAU) + ww2 * uw * d.domega;
        den += wg2 * ug * ug + ww2 * uw * uw;
    }
    if den <= 0.0 || !(num / den).is_finite() || num / den <= 0.0 {
        return None;
    }
    let c = num / den;
    let cost: f64 = data
        .iter()
        .zip(basis.iter())
        .map(|(d, (ug, uw))| {
            let rg = d.gamma_w * (fixed.gamma_0 / TAU + c * ug - d.gamma);
            let rw = d.domega_w * (c * uw - d.domega);
            rg * rg + rw * rw
        })
        .sum();
    Some((c, cost))
}

fn log_grid(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(move |i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
}

/// Fits (β·A, τ_t, coupling scale) to a detuning sweep with all three free.
///
/// Residuals are weighted by the inverse of the supplied uncertainties, or
/// uniformly where none are given. Requires at least four points.
pub fn fit_detuning_sweep(data: &[SweepSample], fixed: FitFixed) -> Result<BackactionFit> {
    fit_detuning_sweep_pinned(data, fixed, Pinned::Nothing)
}

/// As [`fit_detuning_sweep`], holding one parameter at a known value. The
/// pinned parameter is reported with zero standard error.
pub fn fit_detuning_sweep_pinned(data: &[SweepSample], fixed: FitFixed, pinned: Pinned) -> Result<BackactionFit> {
    if data.len() < 4 {
        return Err(FitError::InsufficientData(format!("need >= 4 sweep points, got {}", data.len())).into());
    }
    match pinned {
        Pinned::CouplingScale(c) if !(c > 0.0 && c.is_finite()) => {
            return Err(FitError::InsufficientData(format!("pinned coupling scale must be > 0, got {c}")).into())
        }
        Pinned::TauT(t) if !(t > 0.0 && t.is_finite()) => {
            return Err(FitError::InsufficientData(format!("pinned tau_t must be > 0, got {t}")).into())
        }
        _ => {}
    }
    let weighted = weights(data)?;

    // Seeds as full [β·A, ln τ_t, ln C] vectors, sorted by cost.
    let mut seeds: Vec<(f64, [f64; 3])> = Vec::new();
    let taus: Vec<f64> = match pinned {
        Pinned::TauT(t) => vec![t],
        _ => log_grid(10e-9, 100e-6, 17).collect(),
    };
    for magnitude in log_grid(0.1, 100.0, 13) {
        for beta_a in [magnitude, -magnitude] {
            for &tau_t in &taus {
                let node = match pinned {
                    Pinned::CouplingScale(c) => {
                        let mut r = vec![0.0; 2 * weighted.len()];
                        residuals(&fixed, &weighted, beta_a, tau_t, c, &mut r);
                        Some((c, r.iter().map(|x| x * x).sum()))
                    }
                    _ => profile_scale(&fixed, &weighted, beta_a, tau_t),
                };
                if let Some((c, cost)) = node {
                    seeds.push((cost, [beta_a, tau_t.ln(), c.ln()]));
                }
            }
        }
    }
    if seeds.is_empty() {
        return Err(FitError::Degenerate {
            combination: "ln_coupling_scale (no grid node admits a positive coupling)".into(),
        }
        .into());
    }
    seeds.sort_by(|a, b| a.0.total_cmp(&b.0));

    let free: Vec<usize> = match pinned {
        Pinned::Nothing => vec![0, 1, 2],
        Pinned::CouplingScale(_) => vec![0, 1],
        Pinned::TauT(_) => vec![0, 2],
    };
    let names: Vec<&str> = free.iter().map(|&i| NAMES[i]).collect();
    let expand = |p: &[f64], base: &[f64; 3]| -> [f64; 3] {
        let mut full = *base;
        for (k, &i) in free.iter().enumerate() {
            full[i] = p[k];
        }
        full
    };
    let base = seeds[0].1;
    let f = |p: &[f64], out: &mut [f64]| {
        let full = expand(p, &base);
        residuals(&fixed, &weighted, full[0], full[1].exp(), full[2].exp(), out)
    };
    let problem = Problem {
        names: &names,
        residuals: &f,
        residual_count: 2 * weighted.len(),
    };
    let opts = LmOptions {
        // The all-free problem is exactly rank deficient; finite-difference
        // noise puts its smallest singular value near 1e-9, not zero.
        rank_tol: 1e-7,
        ..LmOptions::default()
    };

    // Refine the best seed of each sign branch and keep the better result.
    // A branch that drifts to a flat region (τ_t → ∞ switches the
    // photothermal term off) may be degenerate; only the winner is judged.
    let mut best: Option<LmReport> = None;
    let mut first_err: Option<FitError> = None;
    for positive in [true, false] {
        let Some((_, seed)) = seeds.iter().find(|(_, p)| (p[0] > 0.0) == positive) else {
            continue;
        };
        let p0: Vec<f64> = free.iter().map(|&i| seed[i]).collect();
        match solve(&problem, &p0, &opts) {
            Ok(rep) => {
                if best.as_ref().is_none_or(|b| rep.chi2 < b.chi2) {
                    best = Some(rep);
                }
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    let rep = match (best, first_err) {
        (Some(r), _) => r,
        (None, Some(e)) => return Err(e.into()),
        (None, None) => unreachable!("at least one seed exists"),
    };
    if let Some(combination) = rep.degenerate {
        return Err(FitError::Degenerate { combination }.into());
    }

    let full = expand(&rep.params, &base);
    let mut errs = [0.0; 3];
    for (k, &i) in free.iter().enumerate() {
        errs[i] = rep.std_errors[k];
    }
    let tau_t = match pinned {
        Pinned::TauT(t) => t,
        _ => full[1].exp(),
    };
    let coupling_scale = match pinned {
        Pinned::CouplingScale(c) => c,
        _ => full[2].exp(),
    };
    Ok(BackactionFit {
        beta_a: full[0],
        tau_t,
        coupling_scale,
        residual_norm: rep.residual_norm(),
        reduced_chi2: rep.reduced_chi2(),
        beta_a_err: errs[0],
        tau_t_err: tau_t * errs[1],
        coupling_scale_err: coupling_scale * errs[2],
        iterations: rep.iterations,
        fixed,
    })
}
