//! Superfluid film acoustics and the non-equilibrium bath model.

use serde::Serialize;

use crate::error::{invalid, Error, FitError, Result};
use crate::lsq::{minimize, LmOptions, Problem};
use crate::model::{MechanicalMode, HBAR, K_B};

/// Van der Waals coefficient for helium on silica, nm⁵/s².
pub const ALPHA_VDW_HELIUM_SILICA: f64 = 2.65e21;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SuperfluidFilm {
    /// nm
    pub thickness_nm: f64,
    /// ρ_s/ρ
    pub superfluid_fraction: f64,
    /// nm⁵/s²
    pub alpha_vdw: f64,
}

impl SuperfluidFilm {
    pub fn new(thickness_nm: f64, superfluid_fraction: f64, alpha_vdw: f64) -> Result<Self> {
        if !(thickness_nm > 0.0 && thickness_nm.is_finite()) {
            return Err(invalid("thickness_nm", format!("must be > 0, got {thickness_nm}")));
        }
        if !(0.0..=1.0).contains(&superfluid_fraction) {
            return Err(invalid(
                "superfluid_fraction",
                format!("must lie in [0, 1], got {superfluid_fraction}"),
            ));
        }
        if !(alpha_vdw > 0.0 && alpha_vdw.is_finite()) {
            return Err(invalid("alpha_vdw", format!("must be > 0, got {alpha_vdw}")));
        }
        Ok(Self {
            thickness_nm,
            superfluid_fraction,
            alpha_vdw,
        })
    }

    pub fn helium_on_silica(thickness_nm: f64, superfluid_fraction: f64) -> Result<Self> {
        Self::new(thickness_nm, superfluid_fraction, ALPHA_VDW_HELIUM_SILICA)
    }
}

/// c_s = √(3·(ρ_s/ρ)·α_vdw/d³), m/s.
pub fn third_sound_speed(film: &SuperfluidFilm) -> f64 {
    let d = film.thickness_nm;
    // nm/s → m/s
    (3.0 * film.superfluid_fraction * film.alpha_vdw / (d * d * d)).sqrt() * 1e-9
}

/// ζ·c_s/(2π·L), Hz: a confined standing wave with geometric eigenvalue ζ.
pub fn mode_frequency(film: &SuperfluidFilm, length_m: f64, zeta: f64) -> Result<f64> {
    if !(length_m > 0.0 && length_m.is_finite()) {
        return Err(invalid("length_m", format!("must be > 0, got {length_m}")));
    }
    if !(zeta > 0.0 && zeta.is_finite()) {
        return Err(invalid("zeta", format!("must be > 0, got {zeta}")));
    }
    Ok(zeta * third_sound_speed(film) / (std::f64::consts::TAU * length_m))
}

/// Zeros j_{m,n} of the Bessel function J_m for a clamped circular membrane,
/// as (m, n, j_{m,n}). Reference data for choosing ζ; not a model of the
/// actual film geometry.
pub const CIRCULAR_MEMBRANE_ZEROS: [(u32, u32, f64); 12] = [
    (0, 1, 2.404_825_557_695_773),
    (1, 1, 3.831_705_970_207_512),
    (2, 1, 5.135_622_301_840_683),
    (0, 2, 5.520_078_110_286_311),
    (3, 1, 6.380_161_895_923_984),
    (1, 2, 7.015_586_669_815_619),
    (4, 1, 7.588_342_434_503_805),
    (2, 2, 8.417_244_140_399_865),
    (0, 3, 8.653_727_912_911_013),
    (5, 1, 8.771_483_815_959_954),
    (3, 2, 9.761_023_129_981_67),
    (1, 3, 10.173_468_135_062_722),
];

/// Force-noise densities seen by the mode at ±ω_m, or the equivalent
/// effective temperature and coupling rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NonEquilibriumBath {
    Densities { s_plus: f64, s_minus: f64 },
    Effective { temperature: f64, coupling: f64 },
}

/// Relative difference below which s₊ and s₋ count as equal.
const EQUAL_DENSITY_TOL: f64 = 1e-12;

fn check_densities(s_plus: f64, s_minus: f64) -> Result<()> {
    for (name, v) in [("s_plus", s_plus), ("s_minus", s_minus)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(invalid(name, format!("must be > 0, got {v}")));
        }
    }
    Ok(())
}

/// T_B = (ħω/k_B)/ln(s₊/s₋), K. Negative when s₋ > s₊.
pub fn bath_temperature(s_plus: f64, s_minus: f64, omega_m: f64) -> Result<f64> {
    check_densities(s_plus, s_minus)?;
    if ((s_plus - s_minus) / s_plus.max(s_minus)).abs() < EQUAL_DENSITY_TOL {
        return Err(Error::InfiniteTemperature);
    }
    Ok(HBAR * omega_m / K_B / ((s_plus - s_minus) / s_minus).ln_1p())
}

/// Γ_B = x_zpf²/ħ²·(s₊ − s₋), rad/s, with densities in N²/(rad/s).
pub fn bath_coupling(s_plus: f64, s_minus: f64, mode: &MechanicalMode) -> Result<f64> {
    if !(s_plus >= 0.0 && s_minus >= 0.0 && s_plus.is_finite() && s_minus.is_finite()) {
        return Err(invalid("densities", "must be finite and >= 0"));
    }
    let x = mode.zero_point_motion();
    Ok(x * x / (HBAR * HBAR) * (s_plus - s_minus))
}

/// T_B·Γ_B, finite and continuous through s₊ = s₋.
///
/// With s₊ = s(1+u), s₋ = s(1−u) the product is
/// (ω x_zpf²/(k_B ħ))·2su/ln((1+u)/(1−u)), and 2u/ln((1+u)/(1−u)) → 1 as u → 0.
pub fn bath_heating_rate(s_plus: f64, s_minus: f64, mode: &MechanicalMode) -> Result<f64> {
    check_densities(s_plus, s_minus)?;
    let x = mode.zero_point_motion();
    let pre = mode.omega_m() * x * x / (K_B * HBAR);
    let s = 0.5 * (s_plus + s_minus);
    let u = 0.5 * (s_plus - s_minus) / s;
    // ln((1+u)/(1−u)) = ln_1p(u) − ln_1p(−u) keeps precision for small u.
    let ratio = if u == 0.0 {
        1.0
    } else {
        2.0 * u / (u.ln_1p() - (-u).ln_1p())
    };
    Ok(pre * s * ratio)
}

/// Resolves a bath description to (T_B, Γ_B) for a given mode.
pub fn bath_effective(bath: &NonEquilibriumBath, mode: &MechanicalMode) -> Result<(f64, f64)> {
    match *bath {
        NonEquilibriumBath::Densities { s_plus, s_minus } => Ok((
            bath_temperature(s_plus, s_minus, mode.omega_m())?,
            bath_coupling(s_plus, s_minus, mode)?,
        )),
        NonEquilibriumBath::Effective { temperature, coupling } => Ok((temperature, coupling)),
    }
}

/// Detailed-balance densities for a bath in equilibrium at `temperature`:
/// s₊/s₋ = exp(ħω/k_B T), with s₋ = `s_minus`.
pub fn equilibrium_densities(temperature: f64, omega_m: f64, s_minus: f64) -> (f64, f64) {
    (s_minus * (HBAR * omega_m / (K_B * temperature)).exp(), s_minus)
}

/// T_final = (T·Γ_0 + T_B·Γ_B)/(Γ_0 + Γ_B), K.
pub fn final_temperature(temperature: f64, gamma_0: f64, bath_temperature: f64, bath_coupling: f64) -> Result<f64> {
    if !(gamma_0 > 0.0) {
        return Err(invalid("gamma_0", format!("must be > 0, got {gamma_0}")));
    }
    let total = gamma_0 + bath_coupling;
    if !(total > 0.0) {
        return Err(Error::Unstable(format!(
            "Γ_0 + Γ_B = {total:e} rad/s <= 0: no steady state"
        )));
    }
    Ok((temperature * gamma_0 + bath_temperature * bath_coupling) / total)
}

/// As [`final_temperature`] using the product T_B·Γ_B directly, which stays
/// defined when the bath densities are equal.
pub fn final_temperature_from_rate(
    temperature: f64,
    gamma_0: f64,
    heating_rate: f64,
    bath_coupling: f64,
) -> Result<f64> {
    final_temperature(temperature, gamma_0, 0.0, bath_coupling)
        .map(|_| (temperature * gamma_0 + heating_rate) / (gamma_0 + bath_coupling))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerLawFit {
    pub amplitude: f64,
    pub exponent: f64,
    pub offset: f64,
    pub amplitude_err: f64,
    pub exponent_err: f64,
    pub offset_err: f64,
    pub residual_norm: f64,
    pub iterations: usize,
}

impl PowerLawFit {
    pub fn value(&self, power: f64) -> f64 {
        self.amplitude * power.powf(self.exponent) + self.offset
    }
}

/// Least-squares fit of y = a·P^b + c.
///
/// The exponent is seeded from the log-log slope of y − min(y) + ε; the
/// amplitude and offset then follow by linear least squares. Powers are
/// used in whatever unit they are given in; `a` carries that unit.
pub fn fit_power_law(powers: &[f64], values: &[f64], errors: Option<&[f64]>) -> Result<PowerLawFit> {
    let n = powers.len();
    if values.len() != n || errors.is_some_and(|e| e.len() != n) {
        return Err(invalid("values", "powers, values and errors must have equal length"));
    }
    if n < 4 {
        return Err(FitError::InsufficientData(format!("need >= 4 points, got {n}")).into());
    }
    if powers.iter().any(|&p| !(p > 0.0 && p.is_finite())) {
        return Err(invalid("powers", "must all be > 0"));
    }
    let w: Vec<f64> = match errors {
        Some(e) => e
            .iter()
            .map(|&s| {
                if s > 0.0 && s.is_finite() {
                    Ok(1.0 / s)
                } else {
                    Err(invalid("errors", format!("must be > 0, got {s}")))
                }
            })
            .collect::<Result<_>>()?,
        None => vec![1.0; n],
    };

    let ymin = values.iter().copied().fold(f64::INFINITY, f64::min);
    let ymax = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let eps = 1e-3 * (ymax - ymin).abs().max(f64::MIN_POSITIVE);
    let lx: Vec<f64> = powers.iter().map(|p| p.ln()).collect();
    let ly: Vec<f64> = values.iter().map(|y| (y - ymin + eps).ln()).collect();
    let mx = lx.iter().sum::<f64>() / n as f64;
    let my = ly.iter().sum::<f64>() / n as f64;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(ly.iter()).map(|(x, y)| (x - mx) * (y - my)).sum();
    let b0 = if sxx > 0.0 { (sxy / sxx).clamp(-5.0, 5.0) } else { 1.0 };

    // Scale amplitude and offset to order one for the finite differences.
    let pref = (powers.iter().map(|p| p.ln()).sum::<f64>() / n as f64).exp();
    let yscale = values
        .iter()
        .map(|v| v.abs())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let linear = |b: f64| -> (f64, f64) {
        // Weighted least squares for y = a'·(P/pref)^b + c.
        let (mut s00, mut s01, mut s11, mut t0, mut t1) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for i in 0..n {
            let u = (powers[i] / pref).powf(b);
            let ww = w[i] * w[i];
            s00 += ww * u * u;
            s01 += ww * u;
            s11 += ww;
            t0 += ww * u * values[i];
            t1 += ww * values[i];
        }
        let det = s00 * s11 - s01 * s01;
        if det.abs() < 1e-300 {
            return (0.0, t1 / s11);
        }
        ((t0 * s11 - t1 * s01) / det, (s00 * t1 - s01 * t0) / det)
    };
    let (a0, c0) = linear(b0);

    let residuals = |p: &[f64], out: &mut [f64]| {
        let (a, b, c) = (p[0] * yscale, p[1], p[2] * yscale);
        for i in 0..n {
            out[i] = w[i] * (a * (powers[i] / pref).powf(b) + c - values[i]);
        }
    };
    let problem = Problem {
        names: &["amplitude", "exponent", "offset"],
        residuals: &residuals,
        residual_count: n,
    };
    let rep = minimize(&problem, &[a0 / yscale, b0, c0 / yscale], &LmOptions::default())?;
    let (a_ref, b, c) = (rep.params[0] * yscale, rep.params[1], rep.params[2] * yscale);
    // a·P^b = a_ref·(P/pref)^b ⇒ a = a_ref·pref^(−b).
    let scale = pref.powf(-b);
    let a = a_ref * scale;
    let cov = &rep.covariance;
    let var_a_ref = cov[(0, 0)] * yscale * yscale;
    let cov_ab = cov[(0, 1)] * yscale;
    let var_b = cov[(1, 1)];
    let ln_pref = pref.ln();
    // ∂a/∂a_ref = scale, ∂a/∂b = −a·ln(pref).
    let var_a = scale * scale * var_a_ref - 2.0 * scale * a * ln_pref * cov_ab + (a * ln_pref).powi(2) * var_b;
    Ok(PowerLawFit {
        amplitude: a,
        exponent: b,
        offset: c,
        amplitude_err: var_a.max(0.0).sqrt(),
        exponent_err: var_b.max(0.0).sqrt(),
        offset_err: (cov[(2, 2)].max(0.0)).sqrt() * yscale,
        residual_norm: rep.residual_norm(),
        iterations: rep.iterations,
    })
}

/// Frequency-versus-temperature record read from `temperature_k,frequency_hz`
/// CSV text, for plotting alongside model output. No model is fitted.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrequencyTemperatureCurve {
    pub temperature_k: Vec<f64>,
    pub frequency_hz: Vec<f64>,
}

impl FrequencyTemperatureCurve {
    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Config("empty CSV".into()))?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        let ti = cols.iter().position(|c| *c == "temperature_k");
        let fi = cols.iter().position(|c| *c == "frequency_hz");
        let (Some(ti), Some(fi)) = (ti, fi) else {
            return Err(Error::Config(
                "header must contain temperature_k and frequency_hz".into(),
            ));
        };
        let mut out = Self {
            temperature_k: vec![],
            frequency_hz: vec![],
        };
        for (no, line) in lines.enumerate() {
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            let get = |i: usize| -> Result<f64> {
                fields
                    .get(i)
                    .ok_or_else(|| Error::Config(format!("row {}: missing column", no + 2)))?
                    .parse()
                    .map_err(|e| Error::Config(format!("row {}: {e}", no + 2)))
            };
            out.temperature_k.push(get(ti)?);
            out.frequency_hz.push(get(fi)?);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mode() -> MechanicalMode {
        MechanicalMode::from_hz(482e3, 106.0, 1e-15, 0.5).unwrap()
    }

    #[test]
    fn third_sound_speed_reference() {
        // √(3·2.65e21/1000) nm/s = √7.95e18 nm/s.
        let film = SuperfluidFilm::helium_on_silica(10.0, 1.0).unwrap();
        let c = third_sound_speed(&film);
        assert!((c / 2.819_574_435_974_337_3 - 1.0).abs() < 1e-12, "{c}");
    }

    #[test]
    fn third_sound_scalings() {
        let no_superfluid = SuperfluidFilm::helium_on_silica(10.0, 0.0).unwrap();
        assert_eq!(third_sound_speed(&no_superfluid), 0.0);
        let thick = SuperfluidFilm::helium_on_silica(20.0, 1.0).unwrap();
        let thin = SuperfluidFilm::helium_on_silica(10.0, 1.0).unwrap();
        let r = third_sound_speed(&thin) / third_sound_speed(&thick);
        assert!((r - 2f64.powf(1.5)).abs() < 1e-12);
        let mut last = f64::INFINITY;
        for d in [1.0, 3.0, 10.0, 30.0] {
            let c = third_sound_speed(&SuperfluidFilm::helium_on_silica(d, 0.7).unwrap());
            assert!(c < last);
            last = c;
        }
        assert!(SuperfluidFilm::helium_on_silica(-1.0, 0.5).is_err());
        assert!(SuperfluidFilm::helium_on_silica(10.0, 1.5).is_err());
    }

    #[test]
    fn mode_frequency_unwinds() {
        let film = SuperfluidFilm::helium_on_silica(10.0, 1.0).unwrap();
        let c = third_sound_speed(&film);
        let f = mode_frequency(&film, c / 1000.0, std::f64::consts::TAU).unwrap();
        assert!((f - 1000.0).abs() < 1e-9);
        let a = mode_frequency(&film, 35e-6, 3.0).unwrap();
        let b = mode_frequency(&film, 70e-6, 3.0).unwrap();
        assert!((a / b - 2.0).abs() < 1e-14);
        for &(_, _, z) in CIRCULAR_MEMBRANE_ZEROS.iter() {
            let f = mode_frequency(&film, 35e-6, z).unwrap();
            assert!((10e3..5e6).contains(&f), "{f}");
        }
        assert!(mode_frequency(&film, 0.0, 1.0).is_err());
    }

    #[test]
    fn bath_temperature_cases() {
        let w = mode().omega_m();
        let unit = HBAR * w / K_B;
        let t = bath_temperature(std::f64::consts::E, 1.0, w).unwrap();
        assert!((t / unit - 1.0).abs() < 1e-15);
        let a = bath_temperature(3.0, 2.0, w).unwrap();
        let b = bath_temperature(2.0, 3.0, w).unwrap();
        assert!((a / -b - 1.0).abs() < 1e-14);
        assert!(matches!(bath_temperature(1.0, 1.0, w), Err(Error::InfiniteTemperature)));
        assert!(matches!(
            bath_temperature(1.0, 1.0 + 1e-14, w),
            Err(Error::InfiniteTemperature)
        ));
        assert!(bath_temperature(0.0, 1.0, w).is_err());
    }

    #[test]
    fn detailed_balance_round_trip() {
        let w = mode().omega_m();
        for t in [1e-6, 1e-3, 0.53, 4.2, 300.0] {
            let (sp, sm) = equilibrium_densities(t, w, 1e-30);
            let back = bath_temperature(sp, sm, w).unwrap();
            assert!((back / t - 1.0).abs() < 1e-9, "{t}: {back}");
        }
    }

    #[test]
    fn coupling_sign_and_linearity() {
        let m = mode();
        assert_eq!(bath_coupling(2.0, 2.0, &m).unwrap(), 0.0);
        let g = bath_coupling(3e-30, 1e-30, &m).unwrap();
        assert!(g > 0.0);
        assert!((bath_coupling(6e-30, 2e-30, &m).unwrap() / g - 2.0).abs() < 1e-14);
        assert!(bath_coupling(1e-30, 3e-30, &m).unwrap() < 0.0);
    }

    #[test]
    fn heating_rate_is_continuous_through_equal_densities() {
        let m = mode();
        let s = 1e-30;
        let limit = m.omega_m() * m.zero_point_motion().powi(2) * s / (K_B * HBAR);
        assert!((bath_heating_rate(s, s, &m).unwrap() / limit - 1.0).abs() < 1e-15);
        for du in [1e-3, 1e-6, 1e-9, 1e-11] {
            let (sp, sm) = (s * (1.0 + du), s * (1.0 - du));
            let product = bath_temperature(sp, sm, m.omega_m()).unwrap() * bath_coupling(sp, sm, &m).unwrap();
            let rate = bath_heating_rate(sp, sm, &m).unwrap();
            // Product agrees with the series form away from cancellation.
            if du >= 1e-6 {
                assert!((product / rate - 1.0).abs() < 1e-6, "{du}");
            }
            assert!((rate / limit - 1.0).abs() < 2.0 * du * du + 1e-15);
        }
    }

    #[test]
    fn final_temperature_cases() {
        assert_eq!(final_temperature(0.5, 10.0, 7.0, 0.0).unwrap(), 0.5);
        assert_eq!(final_temperature(0.5, 10.0, 2.0, 10.0).unwrap(), 1.25);
        assert!(matches!(
            final_temperature(0.5, 10.0, 2.0, -10.0),
            Err(Error::Unstable(_))
        ));
        assert!(final_temperature(0.5, 0.0, 2.0, 1.0).is_err());
        // Convex combination for Γ_B > 0.
        for (t, tb, gb) in [(0.5, 3.0, 4.0), (2.0, 0.1, 0.3)] {
            let tf = final_temperature(t, 1.0, tb, gb).unwrap();
            assert!(tf >= f64::min(t, tb) && tf <= f64::max(t, tb));
        }
    }

    #[test]
    fn negative_bath_narrows_and_heats() {
        for g0 in [1.0, 10.0, 100.0] {
            for frac in [0.1, 0.5, 0.9] {
                for tb in [-0.01, -1.0, -100.0] {
                    let t = 0.5;
                    let gb = -frac * g0;
                    let tf = final_temperature(t, g0, tb, gb).unwrap();
                    assert!(g0 + gb < g0);
                    assert!(tf > t, "T_B={tb}, Γ_B={gb}: {tf}");
                }
            }
        }
    }

    #[test]
    fn power_law_noiseless_recovery() {
        let p: Vec<f64> = (0..20).map(|i| 7.0 * (250.0f64 / 7.0).powf(i as f64 / 19.0)).collect();
        let y: Vec<f64> = p.iter().map(|x| 16.0 * x.powf(0.38) + 19.3).collect();
        let fit = fit_power_law(&p, &y, None).unwrap();
        assert!((fit.amplitude / 16.0 - 1.0).abs() < 1e-6);
        assert!((fit.exponent / 0.38 - 1.0).abs() < 1e-6);
        assert!((fit.offset / 19.3 - 1.0).abs() < 1e-6);
        let mut rev_p = p.clone();
        let mut rev_y = y.clone();
        rev_p.reverse();
        rev_y.reverse();
        let rev = fit_power_law(&rev_p, &rev_y, None).unwrap();
        assert!((rev.exponent - fit.exponent).abs() < 1e-9);
    }

    #[test]
    fn linear_data_gives_unit_exponent() {
        let p: Vec<f64> = (1..=10).map(|i| i as f64).collect();
        let y: Vec<f64> = p.iter().map(|x| 3.0 * x - 1.0).collect();
        let fit = fit_power_law(&p, &y, None).unwrap();
        assert!((fit.exponent - 1.0).abs() < 1e-6);
    }

    #[test]
    fn power_law_rejects_bad_input() {
        assert!(fit_power_law(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0], None).is_err());
        assert!(fit_power_law(&[1.0, -2.0, 3.0, 4.0], &[1.0; 4], None).is_err());
    }

    #[test]
    fn frequency_temperature_import() {
        let c = FrequencyTemperatureCurve::parse_csv("frequency_hz,temperature_k\n480000,0.6\n470000,1.0\n").unwrap();
        assert_eq!(c.temperature_k, vec![0.6, 1.0]);
        assert_eq!(c.frequency_hz, vec![480000.0, 470000.0]);
        assert!(FrequencyTemperatureCurve::parse_csv("a,b\n1,2\n").is_err());
    }
}
