//! Single-resonance fit: S(f) = floor + c/((f_m² − f²)² + f²·γ²).
//!
//! With S the single-sided displacement PSD in m²/Hz and all frequencies in
//! Hz, γ is the full width at half maximum of the peak and
//! ∫₀^∞ c/((f_m² − f²)² + f²γ²) df = c·π/(2·γ·f_m²) is the mode's
//! displacement variance in m². No 2π factors enter because the model is
//! written in ordinary frequency throughout.

use serde::Serialize;

use super::{median, smooth, Psd};
use crate::error::{FitError, Result};
use crate::lsq::{minimize, LmOptions, Problem};
use crate::Error;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumFit {
    /// Hz
    pub f_m: f64,
    /// FWHM, Hz
    pub gamma: f64,
    /// Lorentzian numerator c, m²·Hz³
    pub amplitude: f64,
    /// Variance under the peak, m²
    pub area: f64,
    /// m²/Hz
    pub floor: f64,
    pub f_m_err: f64,
    pub gamma_err: f64,
    pub area_err: f64,
    pub floor_err: f64,
    /// Reduced chi-square with per-bin σ = model/√(segments).
    pub reduced_chi2: f64,
    pub points: usize,
    pub iterations: usize,
}

impl SpectrumFit {
    pub fn value(&self, f: f64) -> f64 {
        lorentzian(f, self.f_m, self.gamma, self.amplitude) + self.floor
    }

    /// Peak PSD of the resonance above the floor.
    pub fn peak(&self) -> f64 {
        lorentzian(self.f_m, self.f_m, self.gamma, self.amplitude)
    }

    /// Mode temperature from equipartition, given the effective mass.
    pub fn temperature(&self, m_eff: f64) -> f64 {
        let w = std::f64::consts::TAU * self.f_m;
        self.area * m_eff * w * w / crate::model::K_B
    }
}

fn lorentzian(f: f64, f_m: f64, gamma: f64, c: f64) -> f64 {
    let d = f_m * f_m - f * f;
    c / (d * d + f * f * gamma * gamma)
}

/// c·π/(2·γ·f_m²).
pub fn lorentzian_area(f_m: f64, gamma: f64, amplitude: f64) -> f64 {
    amplitude * std::f64::consts::PI / (2.0 * gamma * f_m * f_m)
}

/// Fits one resonance inside `band` (Hz).
///
/// The first pass weights bins by a locally smoothed copy of the data; two
/// further passes reweight with the fitted model, since periodogram bins
/// scatter in proportion to their own expectation.
pub fn fit_mode(psd: &Psd, band: (f64, f64)) -> Result<SpectrumFit> {
    let (lo, hi) = band;
    if !(lo < hi) {
        return Err(crate::error::invalid("band", format!("need lo < hi, got {lo}..{hi}")));
    }
    let idx = psd.band_indices(lo, hi);
    let n = idx.len();
    if n < 20 {
        return Err(FitError::InsufficientData(format!("{n} bins in band, need >= 20")).into());
    }
    let f: Vec<f64> = idx.clone().map(|k| psd.frequency(k)).collect();
    let s: Vec<f64> = idx.map(|k| psd.values[k]).collect();
    let k_eff = psd.segment_count.max(1) as f64;

    let width = (n / 50).max(1) | 1;
    let smoothed = smooth(&s, width);
    let floor0 = median(&smoothed).max(0.0);
    let (ipk, &peak_s) = smoothed
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("band is non-empty");
    let height = peak_s - floor0;
    // Smoothed bins scatter by about value/√(segments·width).
    let noise = floor0 / (k_eff * width as f64).sqrt();
    if !(height > 0.0) || height < 5.0 * noise {
        return Err(Error::NoPeak(format!(
            "peak {peak_s:e} does not stand above floor {floor0:e} in {lo}..{hi} Hz"
        )));
    }
    let f0 = f[ipk];
    let half = floor0 + 0.5 * height;
    let left = (0..ipk).rev().find(|&i| smoothed[i] < half).map_or(f[0], |i| f[i]);
    let right = (ipk..n).find(|&i| smoothed[i] < half).map_or(f[n - 1], |i| f[i]);
    let gamma0 = (right - left).max(psd.df);
    let c0 = height * f0 * f0 * gamma0 * gamma0;

    // p = [(f_m − f0)/γ0, ln γ, ln c, floor/height]
    let unpack = |p: &[f64]| (f0 + p[0] * gamma0, p[1].exp(), p[2].exp(), p[3] * height);
    let mut weights: Vec<f64> = smoothed.iter().map(|v| v.abs().max(1e-300 * height)).collect();
    let mut p = vec![0.0, gamma0.ln(), c0.ln(), floor0 / height];
    let mut report = None;
    for _pass in 0..3 {
        let w = weights.clone();
        let residuals = |q: &[f64], out: &mut [f64]| {
            let (fm, g, c, fl) = unpack(q);
            for i in 0..n {
                out[i] = (lorentzian(f[i], fm, g, c) + fl - s[i]) / w[i];
            }
        };
        let problem = Problem {
            names: &["f_m", "ln_gamma", "ln_amplitude", "floor"],
            residuals: &residuals,
            residual_count: n,
        };
        let rep = minimize(&problem, &p, &LmOptions::default())?;
        p = rep.params.clone();
        let (fm, g, c, fl) = unpack(&p);
        weights = f
            .iter()
            .map(|&x| (lorentzian(x, fm, g, c) + fl).abs().max(1e-300 * height))
            .collect();
        report = Some(rep);
    }
    let rep = report.expect("three passes ran");
    let (f_m, gamma, amplitude, floor) = unpack(&p);

    if !(lo..=hi).contains(&f_m) {
        return Err(FitError::AtBound {
            name: "f_m".into(),
            value: f_m,
            detail: format!("centre left the band {lo}..{hi} Hz"),
        }
        .into());
    }
    let gamma_max = hi - lo;
    let gamma_min = 1e-3 * psd.df;
    if gamma >= gamma_max || gamma <= gamma_min {
        return Err(FitError::AtBound {
            name: "gamma".into(),
            value: gamma,
            detail: format!("linewidth outside ({gamma_min:e}, {gamma_max:e}) Hz"),
        }
        .into());
    }

    // Residuals were scaled by the model itself; σ per bin is model/√K.
    let chi2_over_dof = rep.reduced_chi2() * k_eff;
    let cov = &rep.covariance;
    let f_m_err = gamma0 * rep.std_errors[0];
    let gamma_err = gamma * rep.std_errors[1];
    let floor_err = height * rep.std_errors[3];
    let area = lorentzian_area(f_m, gamma, amplitude);
    // ln area = ln c − ln γ − 2 ln f_m + const.
    let dlnf = 2.0 * gamma0 / f_m;
    let grad = [-dlnf, -1.0, 1.0, 0.0];
    let mut var_ln_area = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            var_ln_area += grad[i] * cov[(i, j)] * grad[j];
        }
    }
    Ok(SpectrumFit {
        f_m,
        gamma,
        amplitude,
        area,
        floor,
        f_m_err,
        gamma_err,
        area_err: area * var_ln_area.max(0.0).sqrt(),
        floor_err,
        reduced_chi2: chi2_over_dof,
        points: n,
        iterations: rep.iterations,
    })
}
