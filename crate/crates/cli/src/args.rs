use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Parser, Serialize, Deserialize)]
#[command(name = "thirdsound", version, about = "Superfluid third-sound optomechanics toolkit")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct GlobalOpts {
    /// Parameter file (flat key = value). Defaults to the 482 kHz heating
    /// scenario at Δ = −0.58κ.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Format of tabular outputs.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Frequency and linewidth shifts at the config detuning or over a sweep.
    Backaction(BackactionArgs),
    /// Fits (β·A, τ_t, coupling scale) to a measured detuning sweep.
    FitSweep(FitSweepArgs),
    /// Integrates the Langevin model and writes the displacement trace.
    Simulate(SimulateArgs),
    /// Welch PSD and single-resonance fit of a trace.
    Analyze(AnalyzeArgs),
    /// Wiener filtering and quadrature demodulation of a trace.
    Track(TrackArgs),
    /// Third-sound speed and mode frequencies of a helium film.
    Film(FilmArgs),
    /// Final mode temperature with a non-equilibrium bath.
    Bath(BathArgs),
    /// Fits value = a·P^b + c to a power series.
    FitPower(FitPowerArgs),
    /// Runs a scripted figure reproduction and checks it.
    Repro(ReproArgs),
    /// Re-runs a manifest into --out and compares output digests.
    Rerun(RerunArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Backaction(_) => "backaction",
            Command::FitSweep(_) => "fit-sweep",
            Command::Simulate(_) => "simulate",
            Command::Analyze(_) => "analyze",
            Command::Track(_) => "track",
            Command::Film(_) => "film",
            Command::Bath(_) => "bath",
            Command::FitPower(_) => "fit-power",
            Command::Repro(_) => "repro",
            Command::Rerun(_) => "rerun",
        }
    }
}

/// `start:stop:count` in units of κ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

pub fn parse_sweep(s: &str) -> Result<Sweep, String> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(format!("expected start:stop:count, got `{s}`"));
    }
    let num = |p: &str| p.trim().parse::<f64>().map_err(|e| format!("`{p}`: {e}"));
    let (start, stop) = (num(parts[0])?, num(parts[1])?);
    let count: usize = parts[2].trim().parse().map_err(|e| format!("`{}`: {e}", parts[2]))?;
    if !(start.is_finite() && stop.is_finite()) || count == 0 {
        return Err(format!("need finite bounds and count >= 1, got `{s}`"));
    }
    Ok(Sweep { start, stop, count })
}

/// `lo:hi` in Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub lo: f64,
    pub hi: f64,
}

pub fn parse_band(s: &str) -> Result<Band, String> {
    let (lo, hi) = s.split_once(':').ok_or_else(|| format!("expected lo:hi, got `{s}`"))?;
    let lo: f64 = lo.trim().parse().map_err(|e| format!("`{lo}`: {e}"))?;
    let hi: f64 = hi.trim().parse().map_err(|e| format!("`{hi}`: {e}"))?;
    if !(lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo < hi) {
        return Err(format!("need 0 <= lo < hi, got `{s}`"));
    }
    Ok(Band { lo, hi })
}

fn parse_positive(s: &str) -> Result<f64, String> {
    match s.trim().parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        Ok(v) => Err(format!("must be finite and > 0, got {v}")),
        Err(e) => Err(e.to_string()),
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct BackactionArgs {
    /// Detuning sweep `start:stop:count` in units of κ; input power is held
    /// fixed. Without it, the config detuning alone is evaluated.
    #[arg(long, allow_hyphen_values = true, value_parser = parse_sweep)]
    pub sweep: Option<Sweep>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct FitSweepArgs {
    /// CSV with detuning_over_kappa, gamma_hz, gamma_err_hz, domega_hz,
    /// domega_err_hz. Error columns may be absent or blank.
    #[arg(long)]
    pub input: PathBuf,
    /// Holds g0²|α(Δ=0)|² (rad²/s²) at this value.
    #[arg(long, value_parser = parse_positive, conflicts_with = "pin_tau_t")]
    pub pin_coupling_scale: Option<f64>,
    /// Holds τ_t (s) at this value.
    #[arg(long, value_parser = parse_positive)]
    pub pin_tau_t: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeArg {
    Adiabatic,
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IntegratorArg {
    Exact,
    EulerMaruyama,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SimulateArgs {
    /// Record length, s.
    #[arg(long, value_parser = parse_positive)]
    pub duration: f64,
    /// Sample rate, Hz. Defaults to 25 samples per period of the fastest
    /// simulated timescale.
    #[arg(long, value_parser = parse_positive)]
    pub rate: Option<f64>,
    #[arg(long, value_enum, default_value_t = ModeArg::Adiabatic)]
    pub mode: ModeArg,
    #[arg(long, value_enum, default_value_t = IntegratorArg::Exact)]
    pub integrator: IntegratorArg,
    /// Double-sided displacement-equivalent detection noise PSD, m²/Hz.
    #[arg(long, default_value_t = 0.0)]
    pub shot_noise: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowArg {
    Hann,
    Rectangular,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SpectrumArgs {
    /// Trace CSV with a t_s column and the analysed column.
    #[arg(long)]
    pub input: PathBuf,
    /// Column to analyse.
    #[arg(long, default_value = "homodyne_m")]
    pub column: String,
    /// Welch segment length, samples.
    #[arg(long, default_value_t = 65536)]
    pub segment: usize,
    /// Fractional segment overlap.
    #[arg(long, default_value_t = 0.5)]
    pub overlap: f64,
    #[arg(long, value_enum, default_value_t = WindowArg::Hann)]
    pub window: WindowArg,
    /// Fit band `lo:hi` in Hz. Defaults to f_m ± max(2 kHz, 20·Γ_m/2π) from
    /// the config.
    #[arg(long, value_parser = parse_band)]
    pub band: Option<Band>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub spectrum: SpectrumArgs,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct TrackArgs {
    #[command(flatten)]
    pub spectrum: SpectrumArgs,
    /// Demodulation frequency, Hz. Defaults to the fitted f_m.
    #[arg(long, value_parser = parse_positive)]
    pub fm: Option<f64>,
    /// Spacing of track points, s. Defaults to 1/(4·γ) with γ the fitted
    /// linewidth in Hz.
    #[arg(long, value_parser = parse_positive)]
    pub bin_time: Option<f64>,
    /// Low-pass bandwidth, Hz. Defaults to 1/bin_time.
    #[arg(long, value_parser = parse_positive)]
    pub lp_bw: Option<f64>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct FilmArgs {
    #[arg(long, value_parser = parse_positive)]
    pub thickness_nm: f64,
    /// Superfluid fraction ρ_s/ρ.
    #[arg(long, default_value_t = 1.0)]
    pub fraction: f64,
    /// Van der Waals coefficient, nm⁵/s².
    #[arg(long, value_parser = parse_positive, default_value_t = thirdsound_core::bath::ALPHA_VDW_HELIUM_SILICA)]
    pub alpha_vdw: f64,
    /// Mode length scale, m. Required for the mode table.
    #[arg(long, value_parser = parse_positive)]
    pub length_m: Option<f64>,
    /// Comma-separated dimensionless eigenvalues ζ; f = ζ·c_s/(2π·L).
    /// Defaults to the circular-membrane table when --length-m is given.
    #[arg(long, value_delimiter = ',', value_parser = parse_positive)]
    pub zeta: Vec<f64>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct BathArgs {
    /// Mode temperature without the bath, K. Defaults to the config.
    #[arg(long)]
    pub temperature: Option<f64>,
    /// Intrinsic linewidth Γ_0/2π, Hz. Defaults to the config.
    #[arg(long)]
    pub gamma0_hz: Option<f64>,
    /// Bath density at +ω_m (absorption side).
    #[arg(long, requires = "s_minus", conflicts_with_all = ["bath_temperature", "bath_gamma_hz"])]
    pub s_plus: Option<f64>,
    /// Bath density at −ω_m (emission side).
    #[arg(long, requires = "s_plus")]
    pub s_minus: Option<f64>,
    /// Effective bath temperature T_B, K; may be negative.
    #[arg(long, allow_hyphen_values = true, requires = "bath_gamma_hz")]
    pub bath_temperature: Option<f64>,
    /// Bath coupling Γ_B/2π, Hz; may be negative.
    #[arg(long, allow_hyphen_values = true, requires = "bath_temperature")]
    pub bath_gamma_hz: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
pub enum PowerUnit {
    #[value(name = "W")]
    #[serde(rename = "W")]
    Watt,
    #[value(name = "nW")]
    #[serde(rename = "nW")]
    Nanowatt,
}

impl PowerUnit {
    pub fn per_watt(self) -> f64 {
        match self {
            PowerUnit::Watt => 1.0,
            PowerUnit::Nanowatt => 1e9,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct FitPowerArgs {
    /// CSV with power_w, value and an optional err column.
    #[arg(long)]
    pub input: PathBuf,
    /// Unit in which P enters the power law.
    #[arg(long, value_enum, default_value_t = PowerUnit::Nanowatt)]
    pub power_unit: PowerUnit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
pub enum Figure {
    #[value(name = "fig3")]
    #[serde(rename = "fig3")]
    Fig3,
    #[value(name = "fig4")]
    #[serde(rename = "fig4")]
    Fig4,
    #[value(name = "si-fig2")]
    #[serde(rename = "si-fig2")]
    SiFig2,
}

impl Figure {
    pub fn name(self) -> &'static str {
        match self {
            Figure::Fig3 => "fig3",
            Figure::Fig4 => "fig4",
            Figure::SiFig2 => "si-fig2",
        }
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ReproArgs {
    #[arg(value_enum)]
    pub figure: Figure,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct RerunArgs {
    /// Manifest written by an earlier run.
    #[arg(long)]
    pub manifest: PathBuf,
}
