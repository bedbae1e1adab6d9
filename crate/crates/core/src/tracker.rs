//! Phase-space tracking of a single mode from a displacement record.
//!
//! The record is Wiener filtered (noncausal smoother), mixed down with
//! cos/sin at f_m, low-passed, and sampled once per bin. The reported
//! quadratures are calibrated so that a tone a·cos(ω_m t + φ) yields
//! X = a·cos φ, Y = a·sin φ.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use crate::dsp::{design_zero_phase, filter_zero_phase, zero_phase_response};
use crate::error::{invalid, Error, Result};
use crate::spectral::Psd;

/// Finite realization of the gain S_s/(S_s + S_n).
#[derive(Debug, Clone, PartialEq)]
pub struct WienerFilter {
    /// Hz
    pub frequencies: Vec<f64>,
    /// Ideal gain on `frequencies`, in [0, 1].
    pub gain: Vec<f64>,
    /// Symmetric taps, centre at `taps.len()/2`.
    pub taps: Vec<f64>,
    pub sample_rate: f64,
    /// Noise PSD on `frequencies`, after clamping, m²/Hz.
    pub noise: Vec<f64>,
    /// Largest |realized − ideal|/ideal over bins with ideal gain ≥ 0.5.
    pub passband_ripple: f64,
}

impl WienerFilter {
    /// Linear interpolation of the ideal gain.
    pub fn ideal_gain(&self, f: f64) -> f64 {
        interpolate(&self.frequencies, &self.gain, f)
    }

    pub fn noise_density(&self, f: f64) -> f64 {
        interpolate(&self.frequencies, &self.noise, f)
    }

    /// Frequency response of the taps.
    pub fn realized_gain(&self, f: f64) -> f64 {
        zero_phase_response(&self.taps, f, self.sample_rate)
    }

    pub fn impulse_length(&self) -> usize {
        self.taps.len()
    }
}

fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    match xs.iter().position(|&v| v >= x) {
        None => *ys.last().unwrap_or(&0.0),
        Some(0) => ys[0],
        Some(i) => {
            let t = (x - xs[i - 1]) / (xs[i] - xs[i - 1]);
            ys[i - 1] + t * (ys[i] - ys[i - 1])
        }
    }
}

/// Noncausal Wiener filter from signal and noise PSDs on one grid.
///
/// Noise values below ε·max(S_s), ε = machine epsilon, are raised to that
/// floor so the gain stays defined when the noise vanishes. The taps come
/// from an inverse transform of the gain on a grid twice as fine as the
/// PSD's, truncated where the impulse response has decayed by 10⁻⁶.
pub fn design_wiener(signal: &Psd, noise: &Psd) -> Result<WienerFilter> {
    if !signal.same_grid(noise) {
        return Err(Error::GridMismatch(format!(
            "signal has {} bins at {} Hz spacing, noise has {} at {} Hz",
            signal.values.len(),
            signal.df,
            noise.values.len(),
            noise.df
        )));
    }
    if signal.values.len() < 2 {
        return Err(invalid("signal_psd", "need at least two bins"));
    }
    if signal.values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(invalid("signal_psd", "values must be finite and >= 0"));
    }
    if noise.values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(invalid("noise_psd", "values must be finite and >= 0"));
    }
    let s_max = signal.values.iter().copied().fold(0.0, f64::max);
    let eps = f64::EPSILON * s_max;
    let clamped: Vec<f64> = noise
        .values
        .iter()
        .map(|&n| n.max(eps).max(f64::MIN_POSITIVE))
        .collect();
    let gain: Vec<f64> = signal.values.iter().zip(&clamped).map(|(s, n)| s / (s + n)).collect();
    let frequencies = signal.frequencies();
    let fs = signal.sample_rate;
    let fft_len = 4 * (signal.values.len() - 1).max(1);
    let response = |f: f64| interpolate(&frequencies, &gain, f);

    let full = design_zero_phase(response, fs, fft_len / 2 - 1, fft_len);
    let centre = full.len() / 2;
    let peak = full.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let last = (0..=centre)
        .rev()
        .find(|&k| full[centre + k].abs() > 1e-6 * peak || full[centre - k].abs() > 1e-6 * peak)
        .unwrap_or(0);
    // Tukey(0.5) leaves lags below half_len/2 untapered.
    let half_len = (2 * last + 1).min(centre);
    let taps = design_zero_phase(response, fs, half_len, fft_len);

    let mut ripple: f64 = 0.0;
    for (k, &g) in gain.iter().enumerate() {
        if g >= 0.5 {
            let r = zero_phase_response(&taps, frequencies[k], fs);
            ripple = ripple.max((r - g).abs() / g);
        }
    }
    Ok(WienerFilter {
        frequencies,
        gain,
        taps,
        sample_rate: fs,
        noise: clamped,
        passband_ripple: ripple,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DemodOptions {
    /// Demodulation frequency, Hz.
    pub f_m: f64,
    /// Low-pass corner after mixing, Hz.
    pub lp_bandwidth: f64,
    /// Spacing of track points, s. Must be at least 1/lp_bandwidth.
    pub bin_time: f64,
    /// Seed for the synthetic shot-noise record behind `measurement_std`.
    pub noise_seed: u64,
}

impl DemodOptions {
    pub fn new(f_m: f64, lp_bandwidth: f64, bin_time: f64) -> Self {
        Self {
            f_m,
            lp_bandwidth,
            bin_time,
            noise_seed: 0x5eed,
        }
    }

    /// Low-pass at 4·γ and one point per 1/(4·γ), with γ the linewidth in Hz.
    pub fn for_linewidth(f_m: f64, linewidth_hz: f64) -> Self {
        Self::new(f_m, 4.0 * linewidth_hz, 1.0 / (4.0 * linewidth_hz))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseSpaceTrack {
    /// s, from the start of the record
    pub times: Vec<f64>,
    /// m
    pub x: Vec<f64>,
    /// m
    pub y: Vec<f64>,
    /// Pooled std of X and Y for a noise-only record, m.
    pub measurement_std: f64,
    /// Pooled std of X and Y over this track, m.
    pub thermal_std: f64,
    /// s
    pub bin_time: f64,
    /// Hz
    pub lp_bandwidth: f64,
    /// Hz
    pub f_m: f64,
    /// Raw pipeline output per unit tone amplitude at f_m, divided out of X, Y.
    pub pipeline_gain: f64,
}

impl PhaseSpaceTrack {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn snr_ratio(&self) -> f64 {
        self.thermal_std / self.measurement_std
    }
}

/// Low-pass magnitude 1/√(1 + (f/f_c)⁸): fourth-order Butterworth, zero phase.
fn lowpass_taps(fs: f64, fc: f64) -> Vec<f64> {
    let half_len = ((6.0 * fs / fc).ceil() as usize).max(8);
    let response = |f: f64| 1.0 / (1.0 + (f / fc).powi(8)).sqrt();
    design_zero_phase(response, fs, half_len, 8 * half_len)
}

struct Pipeline<'a> {
    filter: &'a WienerFilter,
    lowpass: Vec<f64>,
    omega_dt: f64,
    indices: Vec<usize>,
    gain: f64,
}

impl Pipeline<'_> {
    /// Raw (X, Y) at each decimation index.
    fn run(&self, record: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let w = filter_zero_phase(&self.filter.taps, record);
        let (mut ic, mut is) = (vec![0.0; w.len()], vec![0.0; w.len()]);
        for (m, v) in w.iter().enumerate() {
            let (s, c) = (self.omega_dt * m as f64).sin_cos();
            ic[m] = v * c;
            is[m] = v * s;
        }
        let half = self.lowpass.len() / 2;
        let mut xs = Vec::with_capacity(self.indices.len());
        let mut ys = Vec::with_capacity(self.indices.len());
        for &n in &self.indices {
            let start = n - half;
            let (mut xi, mut yi) = (0.0, 0.0);
            // Symmetric taps: h[k] multiplies sample n + half − k.
            for (k, h) in self.lowpass.iter().enumerate() {
                let m = start + (2 * half - k);
                xi += h * ic[m];
                yi += h * is[m];
            }
            xs.push(2.0 * xi / self.gain);
            ys.push(-2.0 * yi / self.gain);
        }
        (xs, ys)
    }
}

fn pooled_std(x: &[f64], y: &[f64]) -> f64 {
    let var = |v: &[f64]| {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        v.iter().map(|a| (a - m).powi(2)).sum::<f64>() / (v.len() as f64 - 1.0).max(1.0)
    };
    (0.5 * (var(x) + var(y))).sqrt()
}

/// Demodulates `record` (sampled at the filter's rate) into a phase-space
/// track. Points whose filter support would run past either end of the
/// record are dropped.
pub fn demodulate(record: &[f64], filter: &WienerFilter, opts: &DemodOptions) -> Result<PhaseSpaceTrack> {
    let fs = filter.sample_rate;
    let DemodOptions {
        f_m,
        lp_bandwidth,
        bin_time,
        noise_seed,
    } = *opts;
    if !(f_m > 0.0 && f_m < fs / 2.0) {
        return Err(invalid("f_m", format!("must lie in (0, fs/2), got {f_m}")));
    }
    if !(lp_bandwidth > 0.0 && lp_bandwidth < f_m) {
        return Err(invalid(
            "lp_bandwidth",
            format!("must lie in (0, f_m), got {lp_bandwidth}"),
        ));
    }
    if !(bin_time.is_finite() && bin_time * lp_bandwidth >= 1.0 - 1e-9) {
        return Err(invalid(
            "bin_time",
            format!("{bin_time} s is shorter than 1/lp_bandwidth = {} s", 1.0 / lp_bandwidth),
        ));
    }
    let lowpass = lowpass_taps(fs, lp_bandwidth);
    let margin = lowpass.len() / 2 + filter.taps.len() / 2;
    let n = record.len();
    let indices: Vec<usize> = (0..)
        .map(|k| (((k as f64 + 0.5) * bin_time * fs).round()) as usize)
        .take_while(|&i| i + margin < n)
        .filter(|&i| i >= margin)
        .collect();
    if indices.len() < 2 {
        let needed = 2 * margin + (2.0 * bin_time * fs).ceil() as usize;
        return Err(Error::TooShort { needed, got: n });
    }
    let gain = filter.realized_gain(f_m) * lowpass.iter().sum::<f64>();
    if !(gain > 0.0) {
        return Err(invalid(
            "filter",
            format!("gain at f_m = {f_m} Hz is {gain}, nothing passes"),
        ));
    }
    let pipeline = Pipeline {
        filter,
        lowpass,
        omega_dt: std::f64::consts::TAU * f_m / fs,
        indices,
        gain,
    };
    let (x, y) = pipeline.run(record);

    let s_n = filter.noise_density(f_m);
    let sigma = (s_n * fs / 2.0).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(noise_seed);
    let normal = Normal::new(0.0, sigma).map_err(|e| invalid("noise_psd", e.to_string()))?;
    let shot: Vec<f64> = (0..n).map(|_| normal.sample(&mut rng)).collect();
    let (mx, my) = pipeline.run(&shot);

    let times = pipeline.indices.iter().map(|&i| i as f64 / fs).collect();
    Ok(PhaseSpaceTrack {
        times,
        thermal_std: pooled_std(&x, &y),
        measurement_std: pooled_std(&mx, &my),
        x,
        y,
        bin_time,
        lp_bandwidth,
        f_m,
        pipeline_gain: gain,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Kurtosis {
    pub excess: f64,
    /// √(24/n), the large-n standard error for Gaussian data.
    pub std_error: f64,
}

impl Kurtosis {
    pub fn sigmas(&self) -> f64 {
        self.excess / self.std_error
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadialHistogram {
    /// Bin edges from the track mean, m; one more than `counts`.
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrackStatistics {
    pub points: usize,
    pub mean_x: f64,
    pub mean_y: f64,
    /// [[var X, cov XY], [cov XY, var Y]], m²
    pub covariance: [[f64; 2]; 2],
    pub kurtosis_x: Kurtosis,
    pub kurtosis_y: Kurtosis,
    pub radial_histogram: RadialHistogram,
    /// 1/e time of the quadrature autocorrelation, s. `None` when the
    /// autocorrelation falls off within one bin.
    pub decorrelation_time: Option<f64>,
}

pub const MIN_TRACK_POINTS: usize = 500;
const HISTOGRAM_BINS: usize = 30;

pub fn track_statistics(track: &PhaseSpaceTrack) -> Result<TrackStatistics> {
    let n = track.x.len();
    if n < MIN_TRACK_POINTS {
        return Err(Error::TooShort {
            needed: MIN_TRACK_POINTS,
            got: n,
        });
    }
    let nf = n as f64;
    let mean_x = track.x.iter().sum::<f64>() / nf;
    let mean_y = track.y.iter().sum::<f64>() / nf;
    let dx: Vec<f64> = track.x.iter().map(|v| v - mean_x).collect();
    let dy: Vec<f64> = track.y.iter().map(|v| v - mean_y).collect();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>();
    let vxx = dot(&dx, &dx) / (nf - 1.0);
    let vyy = dot(&dy, &dy) / (nf - 1.0);
    let vxy = dot(&dx, &dy) / (nf - 1.0);

    let kurt = |d: &[f64]| {
        let m2 = d.iter().map(|v| v * v).sum::<f64>() / nf;
        let m4 = d.iter().map(|v| v.powi(4)).sum::<f64>() / nf;
        Kurtosis {
            excess: m4 / (m2 * m2) - 3.0,
            std_error: (24.0 / nf).sqrt(),
        }
    };

    let radii: Vec<f64> = dx.iter().zip(&dy).map(|(a, b)| a.hypot(*b)).collect();
    let r_max = radii.iter().copied().fold(0.0, f64::max);
    let width = if r_max > 0.0 {
        r_max / HISTOGRAM_BINS as f64
    } else {
        1.0
    };
    let mut counts = vec![0u64; HISTOGRAM_BINS];
    for r in &radii {
        counts[((r / width) as usize).min(HISTOGRAM_BINS - 1)] += 1;
    }
    let edges = (0..=HISTOGRAM_BINS).map(|k| k as f64 * width).collect();

    Ok(TrackStatistics {
        points: n,
        mean_x,
        mean_y,
        covariance: [[vxx, vxy], [vxy, vyy]],
        kurtosis_x: kurt(&dx),
        kurtosis_y: kurt(&dy),
        radial_histogram: RadialHistogram { edges, counts },
        decorrelation_time: decorrelation_time(&dx, &dy, track.bin_time),
    })
}

/// Fits ln ρ(k) = a − k·Δt/τ over the lags where the pooled X/Y
/// autocorrelation ρ stays above 0.1, intercept free.
fn decorrelation_time(dx: &[f64], dy: &[f64], dt: f64) -> Option<f64> {
    let n = dx.len();
    let c0: f64 = dx.iter().map(|v| v * v).sum::<f64>() + dy.iter().map(|v| v * v).sum::<f64>();
    if c0 == 0.0 {
        return None;
    }
    let mut pts = vec![(0.0, 0.0)];
    for k in 1..n / 4 {
        let ck: f64 = (0..n - k).map(|i| dx[i] * dx[i + k] + dy[i] * dy[i + k]).sum::<f64>();
        let rho = ck / c0 * n as f64 / (n - k) as f64;
        if rho < 0.1 {
            break;
        }
        pts.push((k as f64 * dt, rho.ln()));
    }
    if pts.len() < 2 {
        return None;
    }
    let m = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let ml = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let stt: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let stl: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - ml)).sum();
    let slope = stl / stt;
    (slope < 0.0).then(|| -1.0 / slope)
}
