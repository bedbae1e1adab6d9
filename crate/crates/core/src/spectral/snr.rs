//! Peak-to-floor signal-to-noise ratio as a function of record length.

use std::sync::Arc;

use num_complex::Complex64;
use realfft::{RealFftPlanner, RealToComplex};
use serde::Serialize;

use super::{median, smooth, Window};
use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SnrPoint {
    /// s
    pub duration: f64,
    pub snr_db: f64,
    /// Number of independent records of this length averaged.
    pub segments: usize,
}

/// For each duration d, the ratio of the peak PSD to the floor PSD within
/// `band`, from Hann periodograms of length d.
///
/// Every non-overlapping length-d stretch of the record contributes one
/// periodogram and the periodograms are averaged, so short durations are not
/// dominated by the χ² scatter of a single estimate. When fewer than
/// [`MIN_AVERAGES`] periodograms fit in the record, the average is further
/// smoothed across ⌈MIN_AVERAGES/count⌉ adjacent bins. The floor is the
/// median of bins more than a quarter band away from the peak. Durations must
/// hold at least ten cycles of the band centre.
pub const MIN_AVERAGES: usize = 400;

pub fn snr_vs_time(samples: &[f64], sample_rate: f64, band: (f64, f64), durations: &[f64]) -> Result<Vec<SnrPoint>> {
    let (lo, hi) = band;
    if !(0.0 <= lo && lo < hi && hi <= sample_rate / 2.0) {
        return Err(invalid("band", format!("need 0 <= lo < hi <= fs/2, got {lo}..{hi}")));
    }
    let total = samples.len() as f64 / sample_rate;
    let centre = 0.5 * (lo + hi);
    let mut planner = RealFftPlanner::<f64>::new();
    let mut out = Vec::with_capacity(durations.len());
    for &d in durations {
        if d * centre < 10.0 {
            return Err(invalid(
                "duration",
                format!("{d} s holds fewer than ten cycles at {centre} Hz"),
            ));
        }
        if d > total * (1.0 + 1e-12) {
            return Err(Error::TooShort {
                needed: (d * sample_rate).ceil() as usize,
                got: samples.len(),
            });
        }
        let n = ((d * sample_rate).round() as usize).min(samples.len());
        let fft = planner.plan_fft_forward(n);
        let raw = averaged_periodogram(samples, n, &fft);
        let count = samples.len() / n;
        let avg = smooth(&raw, MIN_AVERAGES.div_ceil(count) | 1);
        let df = sample_rate / n as f64;
        let start = (lo / df).ceil() as usize;
        let stop = ((hi / df).floor() as usize).min(avg.len() - 1);
        if stop < start + 4 {
            return Err(invalid(
                "duration",
                format!("{d} s resolves fewer than 5 bins in the band"),
            ));
        }
        let band_vals = &avg[start..=stop];
        let (ipk, &peak) = band_vals
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .expect("non-empty band");
        let quarter = (band_vals.len() / 4).max(1);
        let far: Vec<f64> = band_vals
            .iter()
            .enumerate()
            .filter(|(i, _)| i.abs_diff(ipk) > quarter)
            .map(|(_, v)| *v)
            .collect();
        let floor = median(if far.is_empty() { band_vals } else { &far });
        out.push(SnrPoint {
            duration: n as f64 / sample_rate,
            snr_db: 10.0 * (peak / floor).log10(),
            segments: count,
        });
    }
    Ok(out)
}

fn averaged_periodogram(samples: &[f64], n: usize, fft: &Arc<dyn RealToComplex<f64>>) -> Vec<f64> {
    let window = Window::Hann.coefficients(n);
    let mut buf = vec![0.0; n];
    let mut spec: Vec<Complex64> = fft.make_output_vec();
    let mut acc = vec![0.0; n / 2 + 1];
    let count = samples.len() / n;
    for seg in samples.chunks_exact(n) {
        let mean = seg.iter().sum::<f64>() / n as f64;
        for i in 0..n {
            buf[i] = (seg[i] - mean) * window[i];
        }
        fft.process(&mut buf, &mut spec).expect("plan sized");
        for (a, c) in acc.iter_mut().zip(spec.iter()) {
            *a += c.norm_sqr();
        }
    }
    acc.iter_mut().for_each(|a| *a /= count as f64);
    acc
}

/// Extrapolates the short-duration branch to unity SNR.
///
/// Fits snr_db = slope·log10(d) + b by least squares to the points with
/// duration below `below`, and returns (slope in dB per decade, duration at
/// 0 dB).
pub fn unity_snr_duration(points: &[SnrPoint], below: f64) -> Result<(f64, f64)> {
    let sel: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.duration < below)
        .map(|p| (p.duration.log10(), p.snr_db))
        .collect();
    if sel.len() < 2 {
        return Err(invalid("points", "need at least two durations on the short branch"));
    }
    let n = sel.len() as f64;
    let mx = sel.iter().map(|p| p.0).sum::<f64>() / n;
    let my = sel.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = sel.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = sel.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(invalid("points", "short-branch durations are all equal"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    Ok((slope, 10f64.powf(-intercept / slope)))
}
