//! Linear-phase FIR design by frequency sampling and block convolution.

use std::sync::Arc;

use num_complex::Complex64;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};

/// Tukey (tapered cosine) window of length `n`; `alpha` is the tapered
/// fraction. `alpha = 0` is rectangular, `alpha = 1` is Hann.
pub fn tukey(n: usize, alpha: f64) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    let alpha = alpha.clamp(0.0, 1.0);
    let edge = alpha * (n - 1) as f64 / 2.0;
    (0..n)
        .map(|i| {
            let x = i as f64;
            let from_end = (n - 1) as f64 - x;
            let d = x.min(from_end);
            if edge == 0.0 || d >= edge {
                1.0
            } else {
                0.5 * (1.0 - (std::f64::consts::PI * d / edge).cos())
            }
        })
        .collect()
}

/// Zero-phase FIR taps (length `2·half_len + 1`, centre tap at index
/// `half_len`) realizing the real, even frequency response `response(f)`.
///
/// The response is sampled on a grid of `fft_len` points, inverse
/// transformed, truncated symmetrically and tapered with a Tukey window.
pub fn design_zero_phase(response: impl Fn(f64) -> f64, sample_rate: f64, half_len: usize, fft_len: usize) -> Vec<f64> {
    let fft_len = fft_len.max(2 * half_len + 2).next_power_of_two();
    let mut planner = RealFftPlanner::<f64>::new();
    let inverse = planner.plan_fft_inverse(fft_len);
    let mut spectrum: Vec<Complex64> = (0..=fft_len / 2)
        .map(|k| Complex64::new(response(k as f64 * sample_rate / fft_len as f64), 0.0))
        .collect();
    spectrum[fft_len / 2].im = 0.0;
    let mut impulse = vec![0.0; fft_len];
    inverse
        .process(&mut spectrum, &mut impulse)
        .expect("buffer sizes match the plan");
    let scale = 1.0 / fft_len as f64;
    let window = tukey(2 * half_len + 1, 0.5);
    (0..=2 * half_len)
        .map(|i| {
            let lag = i as isize - half_len as isize;
            let idx = lag.rem_euclid(fft_len as isize) as usize;
            impulse[idx] * scale * window[i]
        })
        .collect()
}

/// Real frequency response of symmetric taps centred at `taps.len()/2`.
pub fn zero_phase_response(taps: &[f64], f: f64, sample_rate: f64) -> f64 {
    let half = (taps.len() / 2) as isize;
    let w = std::f64::consts::TAU * f / sample_rate;
    taps.iter()
        .enumerate()
        .map(|(i, h)| h * (w * (i as isize - half) as f64).cos())
        .sum()
}

/// Streaming convolution with a fixed FIR by overlap-save.
///
/// Output sample `n` is `Σ_k taps[k]·x[n−k]`: causal, delayed by
/// `taps.len() − 1` relative to a centred filter's zero-phase alignment by
/// `taps.len()/2`. Blocks must be pushed in order.
pub struct OverlapSave {
    taps_len: usize,
    block: usize,
    fft_len: usize,
    kernel: Vec<Complex64>,
    forward: Arc<dyn RealToComplex<f64>>,
    inverse: Arc<dyn ComplexToReal<f64>>,
    /// Last `taps_len − 1` inputs followed by pending new samples.
    buffer: Vec<f64>,
    scratch_in: Vec<f64>,
    scratch_spec: Vec<Complex64>,
    scratch_out: Vec<f64>,
}

impl OverlapSave {
    pub fn new(taps: &[f64]) -> Self {
        assert!(!taps.is_empty(), "FIR needs at least one tap");
        let fft_len = (4 * taps.len()).next_power_of_two().max(1024);
        let mut planner = RealFftPlanner::<f64>::new();
        let forward = planner.plan_fft_forward(fft_len);
        let inverse = planner.plan_fft_inverse(fft_len);
        let mut padded = vec![0.0; fft_len];
        padded[..taps.len()].copy_from_slice(taps);
        let mut kernel = forward.make_output_vec();
        forward.process(&mut padded, &mut kernel).expect("plan sized");
        let scale = 1.0 / fft_len as f64;
        kernel.iter_mut().for_each(|c| *c *= scale);
        Self {
            taps_len: taps.len(),
            block: fft_len - taps.len() + 1,
            fft_len,
            kernel,
            scratch_spec: forward.make_output_vec(),
            forward,
            inverse,
            buffer: vec![0.0; taps.len() - 1],
            scratch_in: vec![0.0; fft_len],
            scratch_out: vec![0.0; fft_len],
        }
    }

    /// Feeds samples and appends every output that became available.
    pub fn push(&mut self, input: &[f64], out: &mut Vec<f64>) {
        self.buffer.extend_from_slice(input);
        let history = self.taps_len - 1;
        while self.buffer.len() >= history + self.block {
            self.run_block(self.block, out);
        }
    }

    /// Flushes pending samples as if followed by zeros; returns the tail.
    pub fn finish(&mut self, out: &mut Vec<f64>) {
        let history = self.taps_len - 1;
        let pending = self.buffer.len() - history;
        if pending > 0 {
            self.buffer.resize(history + self.block, 0.0);
            self.run_block(pending, out);
        }
    }

    fn run_block(&mut self, emit: usize, out: &mut Vec<f64>) {
        let history = self.taps_len - 1;
        let n = history + self.block;
        self.scratch_in[..n].copy_from_slice(&self.buffer[..n]);
        self.scratch_in[n..].iter_mut().for_each(|v| *v = 0.0);
        self.forward
            .process(&mut self.scratch_in, &mut self.scratch_spec)
            .expect("plan sized");
        for (s, k) in self.scratch_spec.iter_mut().zip(self.kernel.iter()) {
            *s *= k;
        }
        self.scratch_spec[0].im = 0.0;
        let last = self.scratch_spec.len() - 1;
        self.scratch_spec[last].im = 0.0;
        self.inverse
            .process(&mut self.scratch_spec, &mut self.scratch_out)
            .expect("plan sized");
        out.extend_from_slice(&self.scratch_out[history..history + emit]);
        self.buffer.drain(..self.block.min(self.buffer.len() - history));
        debug_assert!(self.fft_len >= n);
    }
}

/// Applies centred symmetric taps with zero phase: `y[n] = Σ_k h[k]·x[n+c−k]`
/// where `c = taps.len()/2`. Samples beyond the record are taken as zero.
pub fn filter_zero_phase(taps: &[f64], input: &[f64]) -> Vec<f64> {
    let delay = taps.len() / 2;
    let mut ols = OverlapSave::new(taps);
    let mut out = Vec::with_capacity(input.len() + taps.len());
    ols.push(input, &mut out);
    ols.push(&vec![0.0; delay], &mut out);
    ols.finish(&mut out);
    out.drain(..delay);
    out.truncate(input.len());
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn direct(taps: &[f64], x: &[f64]) -> Vec<f64> {
        (0..x.len())
            .map(|n| {
                taps.iter()
                    .enumerate()
                    .filter(|(k, _)| *k <= n)
                    .map(|(k, h)| h * x[n - k])
                    .sum()
            })
            .collect()
    }

    #[test]
    fn overlap_save_matches_direct_convolution_in_any_blocking() {
        let taps: Vec<f64> = (0..37).map(|i| ((i * 7 % 11) as f64 - 5.0) / 13.0).collect();
        let x: Vec<f64> = (0..5000).map(|i| ((i * 31 % 97) as f64).sin()).collect();
        let expected = direct(&taps, &x);
        for chunk in [1usize, 17, 1000, 5000] {
            let mut ols = OverlapSave::new(&taps);
            let mut out = Vec::new();
            for c in x.chunks(chunk) {
                ols.push(c, &mut out);
            }
            ols.finish(&mut out);
            assert_eq!(out.len(), x.len());
            for (a, b) in out.iter().zip(expected.iter()) {
                assert!((a - b).abs() < 1e-12, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn zero_phase_filter_preserves_alignment() {
        let taps = vec![0.25, 0.5, 0.25];
        let x = vec![0.0, 0.0, 4.0, 0.0, 0.0];
        assert_eq!(
            filter_zero_phase(&taps, &x)
                .iter()
                .map(|v| (v * 1e12).round() / 1e12)
                .collect::<Vec<_>>(),
            vec![0.0, 1.0, 2.0, 1.0, 0.0]
        );
    }

    #[test]
    fn frequency_sampling_realizes_smooth_response() {
        let fs = 1000.0;
        let fc = 50.0;
        let resp = |f: f64| 1.0 / (1.0 + (f / fc).powi(8)).sqrt();
        let taps = design_zero_phase(resp, fs, 200, 4096);
        for f in [0.0, 10.0, 40.0, 50.0, 60.0, 120.0, 400.0] {
            let got = zero_phase_response(&taps, f, fs);
            assert!((got - resp(f)).abs() < 2e-3, "f={f}: {got} vs {}", resp(f));
        }
    }

    #[test]
    fn tukey_shape() {
        let w = tukey(11, 0.5);
        assert_eq!(w[0], 0.0);
        assert_eq!(w[5], 1.0);
        assert!((w[1] - w[9]).abs() < 1e-15);
        assert!(tukey(5, 0.0).iter().all(|&v| v == 1.0));
    }
}
