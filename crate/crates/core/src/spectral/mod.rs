//! Power spectral density estimation and resonance fitting.
//!
//! All PSDs are single-sided in Hz: for a record with variance σ² the
//! values integrate (Σ values·df) to σ². A thermally driven mode with
//! susceptibility χ′ has the single-sided PSD S_x(f) = 4Γ_m·m_eff·k_B·T·|χ′(2πf)|²,
//! i.e. twice the two-sided density 2Γ_m·m_eff·k_B·T·|χ′|² per unit angular
//! frequency, converted from rad/s to Hz.

mod fit;
mod snr;

use std::sync::Arc;

use num_complex::Complex64;
use realfft::{RealFftPlanner, RealToComplex};

use crate::error::{invalid, Error, Result};

pub use fit::{fit_mode, lorentzian_area, SpectrumFit};
pub use snr::{snr_vs_time, unity_snr_duration, SnrPoint, MIN_AVERAGES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Window {
    #[default]
    Hann,
    Rectangular,
}

impl Window {
    pub fn name(&self) -> &'static str {
        match self {
            Window::Hann => "hann",
            Window::Rectangular => "rectangular",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "hann" | "hanning" => Ok(Window::Hann),
            "rect" | "rectangular" | "boxcar" => Ok(Window::Rectangular),
            other => Err(invalid("window", format!("unknown window {other:?}"))),
        }
    }

    /// Periodic window of length `n`.
    pub fn coefficients(&self, n: usize) -> Vec<f64> {
        match self {
            Window::Rectangular => vec![1.0; n],
            Window::Hann => (0..n)
                .map(|i| 0.5 - 0.5 * (std::f64::consts::TAU * i as f64 / n as f64).cos())
                .collect(),
        }
    }

    /// Equivalent noise bandwidth in bins.
    pub fn enbw_bins(&self) -> f64 {
        match self {
            Window::Rectangular => 1.0,
            Window::Hann => 1.5,
        }
    }
}

/// Single-sided PSD on the grid f_k = k·df, k = 0..values.len().
#[derive(Debug, Clone, PartialEq)]
pub struct Psd {
    pub df: f64,
    pub values: Vec<f64>,
    pub sample_rate: f64,
    pub segment_length: usize,
    pub segment_count: usize,
    pub window: Window,
    /// Equivalent noise bandwidth of one bin, Hz.
    pub resolution_bandwidth: f64,
    /// Mean over segments of Σ(w·x)²/Σw², the time-domain power the values
    /// integrate to.
    pub windowed_mean_square: f64,
}

impl Psd {
    /// Tabulates `f` on the grid a Welch estimate with these settings would
    /// use. Useful for analytic signal and noise models.
    pub fn from_fn(sample_rate: f64, segment_length: usize, f: impl Fn(f64) -> f64) -> Self {
        let df = sample_rate / segment_length as f64;
        let values: Vec<f64> = (0..=segment_length / 2).map(|k| f(k as f64 * df)).collect();
        let windowed_mean_square = values.iter().sum::<f64>() * df;
        Self {
            df,
            values,
            sample_rate,
            segment_length,
            segment_count: 0,
            window: Window::Rectangular,
            resolution_bandwidth: df,
            windowed_mean_square,
        }
    }

    pub fn frequency(&self, k: usize) -> f64 {
        k as f64 * self.df
    }

    pub fn frequencies(&self) -> Vec<f64> {
        (0..self.values.len()).map(|k| self.frequency(k)).collect()
    }

    /// Σ values·df.
    pub fn integrated_power(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.df
    }

    /// Σ values·df over bins with lo ≤ f ≤ hi.
    pub fn band_power(&self, lo: f64, hi: f64) -> f64 {
        self.band_indices(lo, hi).map(|k| self.values[k]).sum::<f64>() * self.df
    }

    pub fn band_indices(&self, lo: f64, hi: f64) -> std::ops::Range<usize> {
        let start = (lo / self.df).ceil().max(0.0) as usize;
        let stop = ((hi / self.df).floor() as usize + 1).min(self.values.len());
        start.min(stop)..stop
    }

    pub fn same_grid(&self, other: &Psd) -> bool {
        self.values.len() == other.values.len() && self.df == other.df && self.sample_rate == other.sample_rate
    }

    /// Every value multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Psd {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= factor);
        out.windowed_mean_square *= factor;
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WelchOptions {
    pub segment_length: usize,
    /// Fraction of a segment shared with the next, in [0, 0.9].
    pub overlap: f64,
    pub window: Window,
}

impl WelchOptions {
    pub fn new(segment_length: usize) -> Self {
        Self {
            segment_length,
            overlap: 0.5,
            window: Window::Hann,
        }
    }

    fn step(&self) -> usize {
        let shared = (self.overlap * self.segment_length as f64).round() as usize;
        (self.segment_length - shared).max(1)
    }
}

/// Welch's averaged modified periodogram over a whole record.
pub fn welch_psd(samples: &[f64], sample_rate: f64, options: &WelchOptions) -> Result<Psd> {
    let mut acc = WelchAccumulator::new(sample_rate, options)?;
    acc.push(samples);
    acc.finish()
}

/// Streaming Welch estimator: feed blocks of any size in order, then
/// [`finish`](Self::finish). Gives results identical to [`welch_psd`] on
/// the concatenated record.
pub struct WelchAccumulator {
    sample_rate: f64,
    options: WelchOptions,
    step: usize,
    window: Vec<f64>,
    window_power: f64,
    fft: Arc<dyn RealToComplex<f64>>,
    pending: Vec<f64>,
    seen: usize,
    sums: Vec<f64>,
    mean_square_sum: f64,
    segments: usize,
    scratch: Vec<f64>,
    spectrum: Vec<Complex64>,
}

impl WelchAccumulator {
    pub fn new(sample_rate: f64, options: &WelchOptions) -> Result<Self> {
        if !(sample_rate > 0.0 && sample_rate.is_finite()) {
            return Err(invalid("sample_rate", format!("must be > 0, got {sample_rate}")));
        }
        if options.segment_length < 2 {
            return Err(invalid("segment_length", "must be at least 2"));
        }
        if !(0.0..=0.9).contains(&options.overlap) {
            return Err(invalid(
                "overlap",
                format!("must lie in [0, 0.9], got {}", options.overlap),
            ));
        }
        let n = options.segment_length;
        let window = options.window.coefficients(n);
        let window_power = window.iter().map(|w| w * w).sum();
        let fft = RealFftPlanner::<f64>::new().plan_fft_forward(n);
        Ok(Self {
            sample_rate,
            options: *options,
            step: options.step(),
            window,
            window_power,
            spectrum: fft.make_output_vec(),
            scratch: vec![0.0; n],
            fft,
            pending: Vec::with_capacity(2 * n),
            seen: 0,
            sums: vec![0.0; n / 2 + 1],
            mean_square_sum: 0.0,
            segments: 0,
        })
    }

    pub fn push(&mut self, block: &[f64]) {
        self.seen += block.len();
        let n = self.options.segment_length;
        let mut rest = block;
        while !rest.is_empty() {
            let take = (n - self.pending.len()).min(rest.len());
            self.pending.extend_from_slice(&rest[..take]);
            rest = &rest[take..];
            if self.pending.len() == n {
                self.process_segment();
                self.pending.drain(..self.step);
            }
        }
    }

    fn process_segment(&mut self) {
        let n = self.options.segment_length;
        let mean = self.pending.iter().sum::<f64>() / n as f64;
        let mut ms = 0.0;
        for i in 0..n {
            let v = (self.pending[i] - mean) * self.window[i];
            self.scratch[i] = v;
            ms += v * v;
        }
        self.mean_square_sum += ms / self.window_power;
        self.fft
            .process(&mut self.scratch, &mut self.spectrum)
            .expect("plan sized");
        for (s, c) in self.sums.iter_mut().zip(self.spectrum.iter()) {
            *s += c.norm_sqr();
        }
        self.segments += 1;
    }

    pub fn segments(&self) -> usize {
        self.segments
    }

    pub fn finish(self) -> Result<Psd> {
        let n = self.options.segment_length;
        if self.segments == 0 {
            return Err(Error::TooShort {
                needed: n,
                got: self.seen,
            });
        }
        let norm = 1.0 / (self.sample_rate * self.window_power * self.segments as f64);
        let last = self.sums.len() - 1;
        let values = self
            .sums
            .iter()
            .enumerate()
            .map(|(k, s)| {
                let single = if k == 0 || (k == last && n.is_multiple_of(2)) {
                    1.0
                } else {
                    2.0
                };
                single * s * norm
            })
            .collect();
        let df = self.sample_rate / n as f64;
        Ok(Psd {
            df,
            values,
            sample_rate: self.sample_rate,
            segment_length: n,
            segment_count: self.segments,
            window: self.options.window,
            resolution_bandwidth: self.options.window.enbw_bins() * df,
            windowed_mean_square: self.mean_square_sum / self.segments as f64,
        })
    }
}

/// Moving average over `width` bins (odd), shrinking at the edges.
pub(crate) fn smooth(values: &[f64], width: usize) -> Vec<f64> {
    let half = width / 2;
    let n = values.len();
    let mut prefix = vec![0.0; n + 1];
    for i in 0..n {
        prefix[i + 1] = prefix[i] + values[i];
    }
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(n);
            (prefix[hi] - prefix[lo]) / (hi - lo) as f64
        })
        .collect()
}

pub(crate) fn median(values: &[f64]) -> f64 {
    let mut v: Vec<f64> = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[cfg(test)]
mod tests;
