//! Thermal-mode spectrum, SNR against measurement time, and phase-space
//! tracking.

use std::f64::consts::{PI, TAU};

use serde_json::json;
use thirdsound_core::model::{MechanicalMode, PhotothermalCoupling, SystemParams};
use thirdsound_core::scenarios::{ModeScenario, BATH_TEMPERATURE_K, M_EFF_KG};
use thirdsound_core::spectral::{fit_mode, snr_vs_time, unity_snr_duration, welch_psd, SnrPoint, WelchOptions};
use thirdsound_core::tracker::{demodulate, design_wiener, track_statistics, DemodOptions, TrackStatistics};
use thirdsound_core::{simulate, PhaseSpaceTrack, Psd, SimConfig, SpectrumFit};

use super::{simulated_displacement_psd, Check};
use crate::error::{CliError, CliResult};
use crate::output::OutputDir;

pub const LINEWIDTH_HZ: f64 = 106.0;
/// Mode frequency of the thermal-spectrum run.
pub const FDT_FREQUENCY_HZ: f64 = 482e3;
pub const FDT_SAMPLE_RATE: f64 = 10e6;
pub const FDT_SEGMENT: usize = 1 << 20;
/// Record length in units of 2π/Γ_m.
pub const FDT_LINEWIDTH_TIMES: f64 = 200.0;

/// The tracking run scales the mode frequency down tenfold so the record
/// needed for 4700 track points stays small; every quantity the checks test
/// depends on Γ_m and the in-band SNR, not on f_m.
pub const TRACK_FREQUENCY_HZ: f64 = 48.2e3;
pub const TRACK_SAMPLE_RATE: f64 = 1e6;
pub const TRACK_DURATION: f64 = 11.2;
pub const TRACK_POINTS: usize = 4700;
/// Peak-to-floor ratio of the PSD in the measurement band.
pub const IN_BAND_SNR_DB: f64 = 20.5;
pub const SNR_BAND_HALF_WIDTH: f64 = 10e3;
/// Short-branch durations, in mechanical periods.
pub const LINEAR_CYCLES: [f64; 4] = [12.0, 24.0, 48.0, 96.0];
/// Long-branch durations, s.
pub const PLATEAU_DURATIONS: [f64; 5] = [0.02, 0.05, 0.1, 0.2, 0.5];

/// A mode with no optical coupling: pure thermal motion.
pub fn bare_params(frequency_hz: f64, linewidth_hz: f64) -> thirdsound_core::Result<SystemParams> {
    let mode = MechanicalMode::from_hz(frequency_hz, linewidth_hz, M_EFF_KG, BATH_TEMPERATURE_K)?;
    let base = ModeScenario::heating()
        .system_params(0.0)?
        .with_mode(mode)
        .with_power(0.0)?;
    Ok(SystemParams {
        coupling: PhotothermalCoupling::from_hz(0.0, 0.0, 0.0, 0.0)?,
        ..base
    })
}

pub struct FdtRun {
    pub psd: Psd,
    pub fit: SpectrumFit,
    pub band: (f64, f64),
    /// k_B·T/(m·ω²), m²
    pub expected_area: f64,
    pub duration: f64,
}

pub fn fdt(seed: u64) -> CliResult<FdtRun> {
    let stage = |e: thirdsound_core::Error| CliError::from(e).at_stage("fdt");
    let params = bare_params(FDT_FREQUENCY_HZ, LINEWIDTH_HZ).map_err(stage)?;
    let duration = FDT_LINEWIDTH_TIMES / LINEWIDTH_HZ;
    let cfg = SimConfig::new(params, duration, FDT_SAMPLE_RATE, seed);
    let psd = simulated_displacement_psd(&cfg, &WelchOptions::new(FDT_SEGMENT)).map_err(stage)?;
    let half = 20.0 * LINEWIDTH_HZ;
    let band = (FDT_FREQUENCY_HZ - half, FDT_FREQUENCY_HZ + half);
    let fit = fit_mode(&psd, band).map_err(stage)?;
    Ok(FdtRun {
        psd,
        fit,
        band,
        expected_area: params.mode.thermal_variance(),
        duration,
    })
}

pub fn fdt_checks(r: &FdtRun) -> Vec<Check> {
    vec![
        Check::relative("AC-4", "fitted Γ_m/2π", r.fit.gamma, LINEWIDTH_HZ, 0.10),
        Check::new(
            "AC-4",
            "fitted f_m offset, Hz",
            r.fit.f_m - FDT_FREQUENCY_HZ,
            "|Δf| <= 1 Hz",
            (r.fit.f_m - FDT_FREQUENCY_HZ).abs() <= 1.0,
        )
        .with_note(format!("fit σ = {:.3} Hz", r.fit.f_m_err)),
        Check::relative(
            "AC-4",
            "area / equipartition variance",
            r.fit.area / r.expected_area,
            1.0,
            0.05,
        )
        .with_note(format!("fit σ = {:.4}", r.fit.area_err / r.expected_area)),
    ]
}

/// Double-sided white floor that puts the peak-to-floor ratio of the
/// single-sided PSD at `snr_db`.
pub fn shot_floor_for_snr(params: &SystemParams, snr_db: f64) -> f64 {
    let mode = &params.mode;
    let peak = 2.0 * mode.thermal_variance() / (PI * mode.linewidth_hz());
    peak / (2.0 * (10f64.powf(snr_db / 10.0) - 1.0))
}

pub struct TrackingRun {
    pub snr: Vec<SnrPoint>,
    pub plateau_db: f64,
    /// dB per decade on the short branch.
    pub slope: f64,
    pub unity_duration: f64,
    pub psd: Psd,
    pub fit: SpectrumFit,
    pub track: PhaseSpaceTrack,
    pub stats: TrackStatistics,
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn linear_durations() -> Vec<f64> {
    LINEAR_CYCLES.iter().map(|c| c / TRACK_FREQUENCY_HZ).collect()
}

pub fn tracking(seed: u64) -> CliResult<TrackingRun> {
    let at = |stage: &'static str| move |e: thirdsound_core::Error| CliError::from(e).at_stage(stage);
    let params = bare_params(TRACK_FREQUENCY_HZ, LINEWIDTH_HZ).map_err(at("tracking"))?;
    let mut cfg = SimConfig::new(params, TRACK_DURATION, TRACK_SAMPLE_RATE, seed);
    cfg.shot_noise_floor = shot_floor_for_snr(&params, IN_BAND_SNR_DB);
    let trace = simulate(&cfg).map_err(at("simulate"))?;
    let fs = trace.sample_rate();

    let mut durations = linear_durations();
    durations.extend(PLATEAU_DURATIONS);
    let band = (
        TRACK_FREQUENCY_HZ - SNR_BAND_HALF_WIDTH,
        TRACK_FREQUENCY_HZ + SNR_BAND_HALF_WIDTH,
    );
    let snr = snr_vs_time(&trace.homodyne, fs, band, &durations).map_err(at("snr"))?;
    let mut plateau: Vec<f64> = snr
        .iter()
        .filter(|p| p.duration >= PLATEAU_DURATIONS[0])
        .map(|p| p.snr_db)
        .collect();
    let plateau_db = median(&mut plateau);
    let below = linear_durations().last().expect("non-empty") * 1.01;
    let (slope, unity_duration) = unity_snr_duration(&snr, below).map_err(at("snr"))?;

    let psd = welch_psd(&trace.homodyne, fs, &WelchOptions::new(1 << 16)).map_err(at("welch"))?;
    let fit = fit_mode(&psd, (TRACK_FREQUENCY_HZ - 2e3, TRACK_FREQUENCY_HZ + 2e3)).map_err(at("fit"))?;
    let signal = Psd::from_fn(fs, psd.segment_length, |f| fit.value(f) - fit.floor);
    let noise = Psd::from_fn(fs, psd.segment_length, |_| fit.floor);
    let filter = design_wiener(&signal, &noise).map_err(at("wiener"))?;
    let opts = DemodOptions::for_linewidth(fit.f_m, LINEWIDTH_HZ);
    let mut track = demodulate(&trace.homodyne, &filter, &opts).map_err(at("demodulate"))?;
    if track.len() < TRACK_POINTS {
        return Err(CliError::from(thirdsound_core::Error::TooShort {
            needed: TRACK_POINTS,
            got: track.len(),
        })
        .at_stage("demodulate"));
    }
    track.times.truncate(TRACK_POINTS);
    track.x.truncate(TRACK_POINTS);
    track.y.truncate(TRACK_POINTS);
    let stats = track_statistics(&track).map_err(at("statistics"))?;
    track.thermal_std = (0.5 * (stats.covariance[0][0] + stats.covariance[1][1])).sqrt();
    Ok(TrackingRun {
        snr,
        plateau_db,
        slope,
        unity_duration,
        psd,
        fit,
        track,
        stats,
    })
}

pub fn tracking_checks(r: &TrackingRun) -> Vec<Check> {
    let mut out = Vec::new();
    let worst = r
        .snr
        .iter()
        .filter(|p| p.duration >= PLATEAU_DURATIONS[0])
        .map(|p| (p.snr_db - r.plateau_db).abs())
        .fold(0.0, f64::max);
    out.push(
        Check::new(
            "AC-5",
            "plateau spread above 2π/Γ_m, dB",
            worst,
            "<= 1.5 dB",
            worst <= 1.5,
        )
        .with_note(format!("plateau {:.2} dB", r.plateau_db)),
    );
    out.push(Check::new(
        "AC-5",
        "short-duration slope, dB/decade",
        r.slope,
        "10 ± 2",
        (r.slope - 10.0).abs() <= 2.0,
    ));
    let expected = 1.0 / (LINEWIDTH_HZ * 10f64.powf(r.plateau_db / 10.0));
    let factor = r.unity_duration / expected;
    out.push(
        Check::new(
            "AC-5",
            "unity-SNR duration / ((2π/Γ_m)/plateau SNR)",
            factor,
            "within a factor of 2",
            (0.5..=2.0).contains(&factor),
        )
        .with_note(format!("{:.3e} s", r.unity_duration)),
    );
    let ratio = r.track.snr_ratio();
    out.push(Check::new(
        "AC-5",
        "thermal_std / measurement_std",
        ratio,
        "[4, 9]",
        (4.0..=9.0).contains(&ratio),
    ));
    for (name, k) in [("X", r.stats.kurtosis_x), ("Y", r.stats.kurtosis_y)] {
        out.push(Check::new(
            "AC-5",
            format!("{name} excess kurtosis, σ over {} points", r.stats.points),
            k.sigmas(),
            "|k| < 3σ",
            k.sigmas().abs() < 3.0,
        ));
    }
    out
}

pub fn write_fdt(out: &mut OutputDir, r: &FdtRun) -> CliResult<()> {
    let mut t = out.table("fig3_psd", &["freq_hz", "psd", "fit"])?;
    for k in r.psd.band_indices(r.band.0, r.band.1) {
        let f = r.psd.frequency(k);
        t.values(&[f, r.psd.values[k], r.fit.value(f)])?;
    }
    t.finish()
}

pub fn write_tracking(out: &mut OutputDir, r: &TrackingRun) -> CliResult<()> {
    let mut t = out.table("fig3_snr", &["duration_s", "snr_db", "segments"])?;
    for p in &r.snr {
        t.values(&[p.duration, p.snr_db, p.segments as f64])?;
    }
    t.finish()?;
    let mut t = out.table("fig3_track", &["t_s", "x_quad_m", "y_quad_m"])?;
    for i in 0..r.track.len() {
        t.values(&[r.track.times[i], r.track.x[i], r.track.y[i]])?;
    }
    t.finish()?;
    let h = &r.stats.radial_histogram;
    let mut t = out.table("fig3_radial_histogram", &["r_lo_m", "r_hi_m", "count"])?;
    for (i, c) in h.counts.iter().enumerate() {
        t.values(&[h.edges[i], h.edges[i + 1], *c as f64])?;
    }
    t.finish()
}

pub fn run(out: &mut OutputDir, seed: u64) -> CliResult<Vec<Check>> {
    let fdt_run = fdt(seed)?;
    write_fdt(out, &fdt_run)?;
    let tr = tracking(seed)?;
    write_tracking(out, &tr)?;
    let mut checks = fdt_checks(&fdt_run);
    checks.extend(tracking_checks(&tr));
    out.write_json(
        "fig3_summary.json",
        &json!({
            "fdt": {
                "duration_s": fdt_run.duration,
                "f_m_hz": fdt_run.fit.f_m,
                "f_m_err_hz": fdt_run.fit.f_m_err,
                "gamma_hz": fdt_run.fit.gamma,
                "gamma_err_hz": fdt_run.fit.gamma_err,
                "area_m2": fdt_run.fit.area,
                "area_err_m2": fdt_run.fit.area_err,
                "equipartition_m2": fdt_run.expected_area,
            },
            "tracking": {
                "f_m_hz": TRACK_FREQUENCY_HZ,
                "in_band_snr_db": IN_BAND_SNR_DB,
                "plateau_db": tr.plateau_db,
                "slope_db_per_decade": tr.slope,
                "unity_snr_duration_s": tr.unity_duration,
                "coherence_time_s": 1.0 / LINEWIDTH_HZ,
                "bin_time_s": tr.track.bin_time,
                "lp_bandwidth_hz": tr.track.lp_bandwidth,
                "thermal_std_m": tr.track.thermal_std,
                "measurement_std_m": tr.track.measurement_std,
                "ratio": tr.track.snr_ratio(),
                "kurtosis_x": tr.stats.kurtosis_x,
                "kurtosis_y": tr.stats.kurtosis_y,
                "decorrelation_time_s": tr.stats.decorrelation_time,
                "expected_decorrelation_time_s": 2.0 / (TAU * LINEWIDTH_HZ),
                "spectrum_fit_f_m_hz": tr.fit.f_m,
                "spectrum_fit_gamma_hz": tr.fit.gamma,
            },
        }),
    )?;
    Ok(checks)
}
