use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::*;

fn white(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
}

#[test]
fn white_noise_is_flat_at_two_over_fs() {
    let fs = 1000.0;
    let x = white(1 << 18, 1);
    let psd = welch_psd(&x, fs, &WelchOptions::new(1024)).unwrap();
    let k = psd.segment_count as f64;
    let mean = psd.values[1..psd.values.len() - 1].iter().sum::<f64>() / (psd.values.len() - 2) as f64;
    assert!((mean * fs / 2.0 - 1.0).abs() < 3.0 / k.sqrt(), "mean level {mean}");
    // Individual bins scatter by about 1/√K (more with overlap correlation).
    let worst = psd.values[1..psd.values.len() - 1]
        .iter()
        .map(|v| (v * fs / 2.0 - 1.0).abs())
        .fold(0.0, f64::max);
    assert!(worst < 6.0 / k.sqrt(), "worst bin deviation {worst}");
}

#[test]
fn parseval_holds_for_every_estimate() {
    for (seg, ov, win) in [
        (256, 0.5, Window::Hann),
        (1000, 0.0, Window::Rectangular),
        (333, 0.9, Window::Hann),
    ] {
        let x: Vec<f64> = white(20_000, 4)
            .iter()
            .enumerate()
            .map(|(i, v)| v + (i as f64 * 0.3).sin())
            .collect();
        let opts = WelchOptions {
            segment_length: seg,
            overlap: ov,
            window: win,
        };
        let psd = welch_psd(&x, 50.0, &opts).unwrap();
        let ratio = psd.integrated_power() / psd.windowed_mean_square;
        assert!((ratio - 1.0).abs() < 1e-12, "{ratio}");
        // And against the raw variance, loosely: window-power correction.
        let var = x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64;
        assert!((psd.integrated_power() / var - 1.0).abs() < 0.01 + 2.0 / psd.segment_count as f64);
    }
}

#[test]
fn tone_power_is_half_amplitude_squared() {
    let fs = 10_000.0;
    let a = 3.0;
    let x: Vec<f64> = (0..200_000)
        .map(|i| a * (std::f64::consts::TAU * 1234.5 * i as f64 / fs).cos())
        .collect();
    let psd = welch_psd(&x, fs, &WelchOptions::new(4096)).unwrap();
    let p = psd.band_power(1200.0, 1270.0);
    assert!((p / (a * a / 2.0) - 1.0).abs() < 1e-3, "{p}");
}

#[test]
fn streaming_matches_batch() {
    let x = white(50_000, 9);
    let opts = WelchOptions::new(2048);
    let batch = welch_psd(&x, 1.0, &opts).unwrap();
    let mut acc = WelchAccumulator::new(1.0, &opts).unwrap();
    for c in x.chunks(777) {
        acc.push(c);
    }
    assert_eq!(acc.finish().unwrap(), batch);
}

#[test]
fn short_record_names_minimum_length() {
    let err = welch_psd(&[0.0; 100], 1.0, &WelchOptions::new(128)).unwrap_err();
    assert!(matches!(err, Error::TooShort { needed: 128, got: 100 }));
    assert!(welch_psd(
        &[0.0; 500],
        1.0,
        &WelchOptions {
            overlap: 0.95,
            ..WelchOptions::new(128)
        }
    )
    .is_err());
}

#[test]
fn doubling_segments_shrinks_scatter_by_root_two() {
    let fs = 1.0;
    let seg = 256;
    let spread = |segments: usize| {
        let devs: Vec<f64> = (0..200)
            .map(|s| {
                let x = white(seg * segments, 100 + s);
                let opts = WelchOptions {
                    overlap: 0.0,
                    ..WelchOptions::new(seg)
                };
                let psd = welch_psd(&x, fs, &opts).unwrap();
                psd.values[40]
            })
            .collect();
        let m = devs.iter().sum::<f64>() / devs.len() as f64;
        (devs.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (devs.len() - 1) as f64).sqrt()
    };
    let ratio = spread(8) / spread(16);
    assert!((ratio - 2f64.sqrt()).abs() < 0.25, "{ratio}");
}

fn lorentzian_psd(fm: f64, gamma: f64, c: f64, floor: f64) -> Psd {
    let mut psd = Psd::from_fn(2.0e6, 1 << 16, |f| {
        let d = fm * fm - f * f;
        floor + c / (d * d + f * f * gamma * gamma)
    });
    psd.segment_count = 1;
    psd
}

#[test]
fn noiseless_lorentzian_recovers_exactly() {
    let (fm, gamma, c, floor) = (482e3, 106.0, 1e-10, 1e-30);
    // Grid spacing 30.5 Hz; fit ±20 linewidths around the peak.
    let psd = lorentzian_psd(fm, gamma, c, floor);
    let fit = fit_mode(&psd, (fm - 2000.0, fm + 2000.0)).unwrap();
    assert!((fit.f_m / fm - 1.0).abs() < 1e-4);
    assert!((fit.gamma / gamma - 1.0).abs() < 1e-4, "{}", fit.gamma);
    assert!((fit.area / lorentzian_area(fm, gamma, c) - 1.0).abs() < 1e-4);
    assert!((fit.floor / floor - 1.0).abs() < 1e-4);
}

#[test]
fn floor_only_has_no_peak() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut psd = Psd::from_fn(1e4, 4096, |_| 1.0);
    psd.segment_count = 50;
    for v in psd.values.iter_mut() {
        let z: f64 = StandardNormal.sample(&mut rng);
        *v = 1.0 + z / 50f64.sqrt();
    }
    assert!(matches!(fit_mode(&psd, (1000.0, 2000.0)), Err(Error::NoPeak(_))));
    let flat = Psd::from_fn(1e4, 4096, |_| 2.0);
    assert!(fit_mode(&flat, (1000.0, 2000.0)).is_err());
}

#[test]
fn fit_is_invariant_to_psd_scale() {
    let psd = lorentzian_psd(50e3, 40.0, 8e6, 2e-8);
    let band = (49e3, 51e3);
    let a = fit_mode(&psd, band).unwrap();
    let b = fit_mode(&psd.scaled(1e-6), band).unwrap();
    assert!((a.f_m - b.f_m).abs() < 1e-6);
    assert!((a.gamma / b.gamma - 1.0).abs() < 1e-9);
    assert!((b.area / (a.area * 1e-6) - 1.0).abs() < 1e-9);
    assert!((b.floor / (a.floor * 1e-6) - 1.0).abs() < 1e-6);
}

#[test]
fn too_few_bins_rejected() {
    let psd = lorentzian_psd(50e3, 40.0, 3.0, 0.0);
    assert!(matches!(fit_mode(&psd, (49.9e3, 50.1e3)), Err(Error::Fit(_))));
}

#[test]
fn snr_of_pure_tone_grows_with_duration() {
    let fs = 100e3;
    let mut x = white(1 << 20, 12);
    for (i, v) in x.iter_mut().enumerate() {
        *v += 0.5 * (std::f64::consts::TAU * 10e3 * i as f64 / fs).cos();
    }
    // Short enough that at least MIN_AVERAGES records fit: no extra smoothing.
    let pts = snr_vs_time(&x, fs, (5e3, 15e3), &[0.001, 0.004, 0.025]).unwrap();
    assert!(pts.iter().all(|p| p.segments >= MIN_AVERAGES));
    assert!(pts[0].snr_db < pts[1].snr_db && pts[1].snr_db < pts[2].snr_db);
    let (slope, _) = unity_snr_duration(&pts, 1.0).unwrap();
    assert!((slope - 10.0).abs() < 1.5, "{slope}");
    assert!(snr_vs_time(&x, fs, (5e3, 15e3), &[0.0005]).is_err());
    assert!(snr_vs_time(&x, fs, (5e3, 15e3), &[100.0]).is_err());
}
