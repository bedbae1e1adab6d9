//! Power-law fits of linewidth and mode energy against laser power.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde_json::json;
use thirdsound_core::bath::{fit_power_law, PowerLawFit};

use super::Check;
use crate::error::{CliError, CliResult};
use crate::output::OutputDir;

/// Power range of the measurements, nW.
pub const POWER_RANGE_NW: (f64, f64) = (7.0, 250.0);
pub const POINTS: usize = 20;
pub const NOISE: f64 = 0.05;

/// A generating power law value = a·P^b + c with P in nW.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dataset {
    pub label: &'static str,
    pub amplitude: f64,
    pub exponent: f64,
    pub offset: f64,
    /// Whether all three parameters are reported values, rather than only
    /// the exponent.
    pub fully_reported: bool,
}

/// Linewidth fits of both modes, and energy curves with the reported
/// exponents. Energy amplitudes and offsets (K per nW^b and K) are
/// illustrative.
pub const DATASETS: [Dataset; 4] = [
    Dataset {
        label: "linewidth_482khz",
        amplitude: 16.0,
        exponent: 0.38,
        offset: 19.3,
        fully_reported: true,
    },
    Dataset {
        label: "linewidth_522khz",
        amplitude: 49.2,
        exponent: 0.14,
        offset: 23.4,
        fully_reported: true,
    },
    Dataset {
        label: "energy_482khz",
        amplitude: 0.1,
        exponent: 0.60,
        offset: 0.53,
        fully_reported: false,
    },
    Dataset {
        label: "energy_522khz",
        amplitude: 0.1,
        exponent: 0.69,
        offset: 0.53,
        fully_reported: false,
    },
];

impl Dataset {
    pub fn value(&self, p: f64) -> f64 {
        self.amplitude * p.powf(self.exponent) + self.offset
    }
}

pub fn powers() -> Vec<f64> {
    let (lo, hi) = POWER_RANGE_NW;
    (0..POINTS)
        .map(|i| lo * (hi / lo).powf(i as f64 / (POINTS - 1) as f64))
        .collect()
}

pub struct DatasetRun {
    pub dataset: Dataset,
    pub powers: Vec<f64>,
    pub clean: Vec<f64>,
    pub noisy: Vec<f64>,
    pub errors: Vec<f64>,
    pub clean_fit: PowerLawFit,
    pub noisy_fit: PowerLawFit,
}

pub fn fit_dataset(dataset: Dataset, seed: u64, stream: u64) -> CliResult<DatasetRun> {
    let powers = powers();
    let clean: Vec<f64> = powers.iter().map(|&p| dataset.value(p)).collect();
    let errors: Vec<f64> = clean.iter().map(|v| NOISE * v).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let noisy: Vec<f64> = clean
        .iter()
        .zip(&errors)
        .map(|(v, e)| v + e * unit.sample(&mut rng))
        .collect();
    let stage = |e: thirdsound_core::Error| CliError::from(e).at_stage(dataset.label);
    Ok(DatasetRun {
        clean_fit: fit_power_law(&powers, &clean, None).map_err(stage)?,
        noisy_fit: fit_power_law(&powers, &noisy, Some(&errors)).map_err(stage)?,
        dataset,
        powers,
        clean,
        noisy,
        errors,
    })
}

pub fn checks(r: &DatasetRun) -> Vec<Check> {
    let d = &r.dataset;
    let (c, n) = (&r.clean_fit, &r.noisy_fit);
    let label = d.label;
    let mut out = vec![Check::relative(
        "AC-7",
        format!("{label} exponent, noiseless"),
        c.exponent,
        d.exponent,
        1e-3,
    )];
    if d.fully_reported {
        out.push(Check::relative(
            "AC-7",
            format!("{label} amplitude, noiseless"),
            c.amplitude,
            d.amplitude,
            1e-3,
        ));
        out.push(Check::relative(
            "AC-7",
            format!("{label} offset, noiseless"),
            c.offset,
            d.offset,
            1e-3,
        ));
    }
    out.push(Check::within_sigma(
        "AC-7",
        format!("{label} exponent, 5% noise"),
        n.exponent,
        d.exponent,
        n.exponent_err,
        3.0,
    ));
    if d.fully_reported {
        out.push(Check::within_sigma(
            "AC-7",
            format!("{label} amplitude, 5% noise"),
            n.amplitude,
            d.amplitude,
            n.amplitude_err,
            3.0,
        ));
        out.push(Check::within_sigma(
            "AC-7",
            format!("{label} offset, 5% noise"),
            n.offset,
            d.offset,
            n.offset_err,
            3.0,
        ));
    }
    out
}

pub fn run(out: &mut OutputDir, seed: u64) -> CliResult<Vec<Check>> {
    let mut checks_all = Vec::new();
    let mut fits = Vec::new();
    for (i, d) in DATASETS.iter().enumerate() {
        let r = fit_dataset(*d, seed, 20 + i as u64)?;
        let mut t = out.table(
            &format!("si_fig2_{}", d.label),
            &["power_nw", "value", "value_noisy", "err", "fit_noisy"],
        )?;
        for k in 0..r.powers.len() {
            let p = r.powers[k];
            t.values(&[p, r.clean[k], r.noisy[k], r.errors[k], r.noisy_fit.value(p)])?;
        }
        t.finish()?;
        checks_all.extend(checks(&r));
        fits.push(json!({
            "label": d.label,
            "generator": {"amplitude": d.amplitude, "exponent": d.exponent, "offset": d.offset},
            "noiseless": r.clean_fit,
            "noisy": r.noisy_fit,
        }));
    }
    out.write_json(
        "si_fig2_fits.json",
        &json!({"power_unit": "nW", "noise": NOISE, "fits": fits}),
    )?;
    Ok(checks_all)
}
