use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::json;
use thirdsound_core::backaction::{
    detuning_sweep, fit_detuning_sweep, fit_detuning_sweep_pinned, linspace, FitFixed, Pinned, SweepSample,
};
use thirdsound_core::bath::{
    bath_coupling, bath_temperature, final_temperature, fit_power_law, mode_frequency, third_sound_speed,
    SuperfluidFilm, CIRCULAR_MEMBRANE_ZEROS,
};
use thirdsound_core::scenarios::{ModeScenario, ANCHOR_DETUNING};
use thirdsound_core::sim::{Integrator, OVERSAMPLING};
use thirdsound_core::spectral::{fit_mode, welch_psd, WelchOptions, Window};
use thirdsound_core::tracker::{demodulate, design_wiener, track_statistics, DemodOptions};
use thirdsound_core::{Config, Psd, SimConfig, SimMode, Simulator, SpectrumFit};

use crate::args::*;
use crate::error::{CliError, CliResult, ErrorKind};
use crate::input::{read_trace, Table};
use crate::manifest::{sha256_file, FileDigest, RunManifest};
use crate::output::OutputDir;
use crate::repro;

/// Seed used when neither the config nor `--seed` supplies one.
pub const DEFAULT_SEED: u64 = 42;

/// Settings carried over from a manifest by `rerun`.
#[derive(Debug, Clone)]
pub struct Replay {
    pub config: Option<String>,
    pub seed: u64,
}

/// State shared by one invocation.
pub struct Context<'a> {
    cli: &'a Cli,
    replay: Option<Replay>,
    pub out: OutputDir,
    inputs: Vec<FileDigest>,
    config_text: Option<String>,
    seed: u64,
}

impl<'a> Context<'a> {
    fn new(cli: &'a Cli, replay: Option<Replay>) -> CliResult<Self> {
        let out = OutputDir::create(&cli.global.out, cli.global.format)?;
        let seed = match &replay {
            Some(r) => r.seed,
            None => cli.global.seed.unwrap_or(DEFAULT_SEED),
        };
        Ok(Self {
            cli,
            replay,
            out,
            inputs: Vec::new(),
            config_text: None,
            seed,
        })
    }

    /// Resolves the parameter file (or the default scenario), applies
    /// `--seed`, and writes the result to `config.toml`.
    pub fn config(&mut self) -> CliResult<Config> {
        let mut config = match self.replay.as_ref().and_then(|r| r.config.clone()) {
            Some(text) => Config::parse(&text)?,
            None => match &self.cli.global.config {
                Some(path) => {
                    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
                    self.record_input(path)?;
                    let mut c = Config::parse(&text).map_err(|e| CliError::from(e).at_stage("config"))?;
                    if let Some(seed) = self.cli.global.seed {
                        c.seed = seed;
                    }
                    c
                }
                None => Config::new(
                    ModeScenario::heating().system_params(ANCHOR_DETUNING)?,
                    self.cli.global.seed.unwrap_or(DEFAULT_SEED),
                ),
            },
        };
        if let Some(r) = &self.replay {
            config.seed = r.seed;
        }
        let text = config.to_text();
        self.out.write_text("config.toml", &text)?;
        self.config_text = Some(text);
        self.seed = config.seed;
        Ok(config)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn record_input(&mut self, path: &Path) -> CliResult<()> {
        let digest = FileDigest {
            path: path.display().to_string(),
            sha256: sha256_file(path)?,
        };
        if !self.inputs.contains(&digest) {
            self.inputs.push(digest);
        }
        Ok(())
    }
}

/// Runs a parsed command and writes its manifest. Returns the exit code.
pub fn execute(cli: &Cli, argv: Vec<String>, replay: Option<Replay>) -> CliResult<i32> {
    let start = Instant::now();
    if let Command::Rerun(args) = &cli.command {
        return rerun(cli, args);
    }
    let mut ctx = Context::new(cli, replay)?;
    let code = match &cli.command {
        Command::Backaction(a) => backaction(&mut ctx, a),
        Command::FitSweep(a) => fit_sweep(&mut ctx, a),
        Command::Simulate(a) => simulate(&mut ctx, a),
        Command::Analyze(a) => analyze(&mut ctx, a),
        Command::Track(a) => track(&mut ctx, a),
        Command::Film(a) => film(&mut ctx, a),
        Command::Bath(a) => bath(&mut ctx, a),
        Command::FitPower(a) => fit_power(&mut ctx, a),
        Command::Repro(a) => repro::run(&mut ctx, a.figure),
        Command::Rerun(_) => unreachable!("handled above"),
    }?;
    let outputs = ctx
        .out
        .written()
        .iter()
        .map(|name| {
            Ok(FileDigest {
                path: name.clone(),
                sha256: sha256_file(&ctx.out.root().join(name))?,
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    let manifest = RunManifest {
        subcommand: cli.command.name().to_string(),
        argv,
        command: cli.command.clone(),
        format: cli.global.format,
        config: ctx.config_text.clone(),
        seed: ctx.seed,
        version: env!("CARGO_PKG_VERSION").to_string(),
        inputs: ctx.inputs.clone(),
        outputs,
        exit_code: code,
        wall_clock_s: start.elapsed().as_secs_f64(),
    };
    let path = ctx.out.root().join(RunManifest::file_name(cli.command.name()));
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
    Ok(code)
}

fn backaction(ctx: &mut Context, args: &BackactionArgs) -> CliResult<i32> {
    let params = ctx.config()?.params;
    let detunings = match args.sweep {
        Some(s) => linspace(s.start, s.stop, s.count),
        None => vec![params.cavity.detuning_over_kappa()],
    };
    let points = detuning_sweep(&params, &detunings)?;
    let rows: Vec<Vec<Option<f64>>> = points
        .iter()
        .map(|p| {
            vec![
                Some(p.detuning_over_kappa),
                Some(p.delta_omega_hz()),
                Some(p.delta_gamma_hz()),
                Some(p.effective_gamma_hz()),
                p.temperature_ratio,
            ]
        })
        .collect();
    ctx.out.write_table(
        "backaction",
        &[
            "detuning_over_kappa",
            "delta_omega_hz",
            "delta_gamma_hz",
            "gamma_eff_hz",
            "temperature_ratio",
        ],
        &rows,
    )?;
    Ok(0)
}

fn fit_sweep(ctx: &mut Context, args: &FitSweepArgs) -> CliResult<i32> {
    let params = ctx.config()?.params;
    let table = Table::read(&args.input)?;
    ctx.record_input(&args.input)?;
    let detuning = table.required("detuning_over_kappa")?;
    let gamma = table.required("gamma_hz")?;
    let domega = table.required("domega_hz")?;
    let blank = vec![None; table.len()];
    let gamma_err = table.optional("gamma_err_hz").unwrap_or(&blank);
    let domega_err = table.optional("domega_err_hz").unwrap_or(&blank);
    let data: Vec<SweepSample> = (0..table.len())
        .map(|i| SweepSample {
            detuning_over_kappa: detuning[i],
            gamma_hz: gamma[i],
            gamma_err_hz: gamma_err[i],
            domega_hz: domega[i],
            domega_err_hz: domega_err[i],
        })
        .collect();
    let fixed = FitFixed {
        kappa: params.cavity.kappa(),
        omega_m: params.mode.omega_m(),
        gamma_0: params.mode.gamma_m(),
    };
    let pinned = match (args.pin_coupling_scale, args.pin_tau_t) {
        (Some(c), _) => Pinned::CouplingScale(c),
        (None, Some(t)) => Pinned::TauT(t),
        (None, None) => Pinned::Nothing,
    };
    let fit = match pinned {
        Pinned::Nothing => fit_detuning_sweep(&data, fixed),
        p => fit_detuning_sweep_pinned(&data, fixed, p),
    }
    .map_err(|e| CliError::from(e).at_stage("fit"))?;
    let at = params.cavity.detuning_over_kappa();
    ctx.out.write_json(
        "fit_sweep.json",
        &json!({
            "beta_a": fit.beta_a,
            "beta_a_err": fit.beta_a_err,
            "tau_t_s": fit.tau_t,
            "tau_t_err_s": fit.tau_t_err,
            "coupling_scale": fit.coupling_scale,
            "coupling_scale_err": fit.coupling_scale_err,
            "pinned": match pinned {
                Pinned::Nothing => "none",
                Pinned::CouplingScale(_) => "coupling_scale",
                Pinned::TauT(_) => "tau_t",
            },
            "reduced_chi2": fit.reduced_chi2,
            "residual_norm": fit.residual_norm,
            "iterations": fit.iterations,
            "points": data.len(),
            "detuning_over_kappa": at,
            "temperature_ratio": fit.temperature_ratio(at),
        }),
    )?;
    Ok(0)
}

fn sim_mode(m: ModeArg) -> SimMode {
    match m {
        ModeArg::Adiabatic => SimMode::Adiabatic,
        ModeArg::Full => SimMode::FullCavity,
    }
}

fn simulate(ctx: &mut Context, args: &SimulateArgs) -> CliResult<i32> {
    let config = ctx.config()?;
    let mut cfg = SimConfig::new(config.params, args.duration, 0.0, config.seed);
    cfg.mode = sim_mode(args.mode);
    cfg.integrator = match args.integrator {
        IntegratorArg::Exact => Integrator::Exact,
        IntegratorArg::EulerMaruyama => Integrator::EulerMaruyama,
    };
    cfg.shot_noise_floor = args.shot_noise;
    cfg.sample_rate = args
        .rate
        .unwrap_or_else(|| cfg.required_sample_rate() * DEFAULT_RATE_MARGIN);
    let mut sim = Simulator::new(&cfg)?;
    let dt = 1.0 / cfg.sample_rate;
    let mut table = ctx.out.table("trace", &["t_s", "x_m", "homodyne_m"])?;
    let (mut x, mut h) = (Vec::new(), Vec::new());
    let mut index = 0usize;
    loop {
        x.clear();
        h.clear();
        let n = sim.next_block(1 << 16, &mut x, &mut h);
        for k in 0..n {
            table.values(&[(index + k) as f64 * dt, x[k], h[k]])?;
        }
        index += n;
        if n == 0 || sim.remaining() == 0 {
            break;
        }
    }
    table.finish()?;
    ctx.out.write_json(
        "simulate.json",
        &json!({
            "config_hash": cfg.config_hash(),
            "seed": cfg.seed,
            "duration_s": cfg.duration,
            "sample_rate_hz": cfg.sample_rate,
            "samples": index,
            "mode": cfg.mode.name(),
            "integrator": cfg.integrator.name(),
            "shot_noise_floor": cfg.shot_noise_floor,
            "unstable": sim.is_unstable(),
            "stationary_variance_m2": sim.stationary_variance(),
        }),
    )?;
    if sim.is_unstable() {
        return Err(CliError::new(
            ErrorKind::Numerical,
            format!("integration became non-finite after {index} samples; output truncated"),
        )
        .at_stage("simulate"));
    }
    Ok(0)
}

/// Default sample rate relative to the minimum accepted one.
pub const DEFAULT_RATE_MARGIN: f64 = 25.0 / OVERSAMPLING;

struct Spectrum {
    samples: Vec<f64>,
    sample_rate: f64,
    psd: Psd,
    fit: SpectrumFit,
    band: Band,
    m_eff: f64,
}

fn default_band(config: &Config) -> Band {
    let f = config.params.mode.frequency_hz();
    let half = (20.0 * config.params.mode.linewidth_hz()).max(2e3).min(0.5 * f);
    Band {
        lo: f - half,
        hi: f + half,
    }
}

fn spectrum(ctx: &mut Context, args: &SpectrumArgs) -> CliResult<Spectrum> {
    let config = ctx.config()?;
    let trace = read_trace(&args.input, &args.column)?;
    ctx.record_input(&args.input)?;
    let options = WelchOptions {
        segment_length: args.segment,
        overlap: args.overlap,
        window: match args.window {
            WindowArg::Hann => Window::Hann,
            WindowArg::Rectangular => Window::Rectangular,
        },
    };
    let psd =
        welch_psd(&trace.samples, trace.sample_rate, &options).map_err(|e| CliError::from(e).at_stage("welch"))?;
    let band = args.band.unwrap_or_else(|| default_band(&config));
    let fit = fit_mode(&psd, (band.lo, band.hi)).map_err(|e| CliError::from(e).at_stage("fit"))?;
    Ok(Spectrum {
        samples: trace.samples,
        sample_rate: trace.sample_rate,
        psd,
        fit,
        band,
        m_eff: config.params.mode.m_eff(),
    })
}

#[derive(Serialize)]
struct FitErrors {
    f_m_hz: f64,
    gamma_hz: f64,
    area: f64,
    floor: f64,
}

fn fit_json(fit: &SpectrumFit, band: Band, m_eff: f64) -> serde_json::Value {
    json!({
        "f_m_hz": fit.f_m,
        "gamma_hz": fit.gamma,
        "area": fit.area,
        "floor": fit.floor,
        "peak": fit.peak(),
        "errors": FitErrors {
            f_m_hz: fit.f_m_err,
            gamma_hz: fit.gamma_err,
            area: fit.area_err,
            floor: fit.floor_err,
        },
        "chi2": fit.reduced_chi2,
        "points": fit.points,
        "band_hz": [band.lo, band.hi],
        "temperature_k": fit.temperature(m_eff),
    })
}

fn analyze(ctx: &mut Context, args: &AnalyzeArgs) -> CliResult<i32> {
    let s = spectrum(ctx, &args.spectrum)?;
    let mut table = ctx.out.table("psd", &["freq_hz", "psd"])?;
    for (k, v) in s.psd.values.iter().enumerate() {
        table.values(&[s.psd.frequency(k), *v])?;
    }
    table.finish()?;
    let mut report = fit_json(&s.fit, s.band, s.m_eff);
    report["segments"] = json!(s.psd.segment_count);
    report["resolution_bandwidth_hz"] = json!(s.psd.resolution_bandwidth);
    ctx.out.write_json("fit.json", &report)?;
    Ok(0)
}

fn track(ctx: &mut Context, args: &TrackArgs) -> CliResult<i32> {
    let s = spectrum(ctx, &args.spectrum)?;
    let fit = &s.fit;
    let signal = Psd::from_fn(s.sample_rate, s.psd.segment_length, |f| fit.value(f) - fit.floor);
    let noise = Psd::from_fn(s.sample_rate, s.psd.segment_length, |_| fit.floor.max(0.0));
    let filter = design_wiener(&signal, &noise).map_err(|e| CliError::from(e).at_stage("wiener"))?;
    let f_m = args.fm.unwrap_or(fit.f_m);
    let bin_time = args.bin_time.unwrap_or(1.0 / (4.0 * fit.gamma));
    let lp = args.lp_bw.unwrap_or(1.0 / bin_time);
    let opts = DemodOptions::new(f_m, lp, bin_time);
    let track = demodulate(&s.samples, &filter, &opts).map_err(|e| CliError::from(e).at_stage("demodulate"))?;
    let mut table = ctx.out.table("track", &["t_s", "x_quad_m", "y_quad_m"])?;
    for i in 0..track.len() {
        table.values(&[track.times[i], track.x[i], track.y[i]])?;
    }
    table.finish()?;
    let stats = track_statistics(&track).ok();
    ctx.out.write_json(
        "track_stats.json",
        &json!({
            "thermal_std": track.thermal_std,
            "measurement_std": track.measurement_std,
            "ratio": track.snr_ratio(),
            "kurtosis_x": stats.as_ref().map(|s| s.kurtosis_x),
            "kurtosis_y": stats.as_ref().map(|s| s.kurtosis_y),
            "covariance": stats.as_ref().map(|s| s.covariance),
            "decorrelation_time_s": stats.as_ref().and_then(|s| s.decorrelation_time),
            "points": track.len(),
            "f_m_hz": f_m,
            "bin_time_s": bin_time,
            "lp_bandwidth_hz": lp,
            "wiener_taps": filter.taps.len(),
            "spectrum_fit": fit_json(fit, s.band, s.m_eff),
        }),
    )?;
    Ok(0)
}

fn film(ctx: &mut Context, args: &FilmArgs) -> CliResult<i32> {
    let film = SuperfluidFilm::new(args.thickness_nm, args.fraction, args.alpha_vdw)?;
    let c_s = third_sound_speed(&film);
    println!("c_s_m_per_s = {}", thirdsound_core::config::fmt_f64(c_s));
    let mut modes = Vec::new();
    if let Some(length) = args.length_m {
        let labelled: Vec<(Option<(u32, u32)>, f64)> = if args.zeta.is_empty() {
            CIRCULAR_MEMBRANE_ZEROS
                .iter()
                .map(|&(m, n, z)| (Some((m, n)), z))
                .collect()
        } else {
            args.zeta.iter().map(|&z| (None, z)).collect()
        };
        let mut table = ctx.out.table("film_modes", &["zeta", "frequency_hz"])?;
        for (label, z) in labelled {
            let f = mode_frequency(&film, length, z)?;
            table.values(&[z, f])?;
            println!("zeta = {}  f_hz = {}", z, thirdsound_core::config::fmt_f64(f));
            modes.push(json!({"zeta": z, "membrane_mn": label, "frequency_hz": f}));
        }
        table.finish()?;
    } else if !args.zeta.is_empty() {
        return Err(CliError::usage("--zeta needs --length-m"));
    }
    ctx.out.write_json(
        "film.json",
        &json!({
            "thickness_nm": film.thickness_nm,
            "superfluid_fraction": film.superfluid_fraction,
            "alpha_vdw_nm5_per_s2": film.alpha_vdw,
            "c_s_m_per_s": c_s,
            "length_m": args.length_m,
            "modes": modes,
        }),
    )?;
    Ok(0)
}

fn bath(ctx: &mut Context, args: &BathArgs) -> CliResult<i32> {
    let config = ctx.config()?;
    let mut mode = config.params.mode;
    if let Some(g) = args.gamma0_hz {
        mode = mode.with_linewidth_hz(g)?;
    }
    if let Some(t) = args.temperature {
        mode = mode.with_temperature(t)?;
    }
    let (t_b, gamma_b) = match (args.s_plus, args.s_minus, args.bath_temperature, args.bath_gamma_hz) {
        (Some(sp), Some(sm), _, _) => (bath_temperature(sp, sm, mode.omega_m())?, bath_coupling(sp, sm, &mode)?),
        (_, _, Some(t), Some(g)) => (t, std::f64::consts::TAU * g),
        _ => {
            return Err(CliError::usage(
                "give either --s-plus and --s-minus, or --bath-temperature and --bath-gamma-hz",
            ))
        }
    };
    let t_final = final_temperature(mode.temperature(), mode.gamma_m(), t_b, gamma_b)?;
    println!("t_final_k = {}", thirdsound_core::config::fmt_f64(t_final));
    ctx.out.write_json(
        "bath.json",
        &json!({
            "temperature_k": mode.temperature(),
            "gamma0_hz": mode.linewidth_hz(),
            "omega_m_hz": mode.frequency_hz(),
            "bath_temperature_k": t_b,
            "bath_gamma_hz": gamma_b / std::f64::consts::TAU,
            "t_final_k": t_final,
            "heating_with_narrowing": gamma_b < 0.0 && t_final > mode.temperature(),
        }),
    )?;
    Ok(0)
}

fn fit_power(ctx: &mut Context, args: &FitPowerArgs) -> CliResult<i32> {
    let table = Table::read(&args.input)?;
    ctx.record_input(&args.input)?;
    let scale = args.power_unit.per_watt();
    let powers: Vec<f64> = table.required("power_w")?.iter().map(|p| p * scale).collect();
    let values = table.required("value")?;
    let errors = match table.optional("err") {
        Some(col) if col.iter().all(Option::is_some) => {
            Some(col.iter().map(|e| e.expect("checked")).collect::<Vec<_>>())
        }
        Some(col) if col.iter().any(Option::is_some) => {
            return Err(CliError::new(ErrorKind::Config, "column `err` is partly blank"))
        }
        _ => None,
    };
    let fit = fit_power_law(&powers, &values, errors.as_deref()).map_err(|e| CliError::from(e).at_stage("fit"))?;
    let mut report = serde_json::to_value(&fit).expect("fit serializes");
    report["power_unit"] = json!(args.power_unit);
    report["points"] = json!(powers.len());
    ctx.out.write_json("power_fit.json", &report)?;
    Ok(0)
}

#[derive(Debug, Serialize)]
struct RerunReport {
    manifest: String,
    out: String,
    exit_code: i32,
    matched: Vec<String>,
    mismatched: Vec<String>,
    missing: Vec<String>,
}

fn rerun(cli: &Cli, args: &RerunArgs) -> CliResult<i32> {
    let manifest = RunManifest::load(&args.manifest)?;
    if let Command::Rerun(_) = manifest.command {
        return Err(CliError::usage("cannot rerun a rerun"));
    }
    for input in &manifest.inputs {
        let digest = sha256_file(Path::new(&input.path))?;
        if digest != input.sha256 {
            return Err(CliError::new(
                ErrorKind::Mismatch,
                format!("input {} changed since the manifest was written", input.path),
            ));
        }
    }
    let original = args.manifest.parent().map(Path::to_path_buf).unwrap_or_default();
    let same = |a: &Path, b: &Path| match (a.canonicalize(), b.canonicalize()) {
        (Ok(x), Ok(y)) => x == y,
        _ => false,
    };
    let target: PathBuf = cli.global.out.clone();
    std::fs::create_dir_all(&target).map_err(|e| CliError::io(&target, e))?;
    if same(&original, &target) || same(&original.join("."), &target) {
        return Err(CliError::usage(
            "rerun needs an --out directory other than the manifest's",
        ));
    }
    let replayed = Cli {
        global: GlobalOpts {
            config: None,
            seed: Some(manifest.seed),
            out: target.clone(),
            format: manifest.format,
        },
        command: manifest.command.clone(),
    };
    let replay = Replay {
        config: manifest.config.clone(),
        seed: manifest.seed,
    };
    let code = match execute(&replayed, manifest.argv.clone(), Some(replay)) {
        Ok(code) => code,
        Err(e) => return Err(e.at_stage("rerun")),
    };
    let mut report = RerunReport {
        manifest: args.manifest.display().to_string(),
        out: target.display().to_string(),
        exit_code: code,
        matched: vec![],
        mismatched: vec![],
        missing: vec![],
    };
    for output in &manifest.outputs {
        let path = target.join(&output.path);
        match sha256_file(&path) {
            Ok(d) if d == output.sha256 => report.matched.push(output.path.clone()),
            Ok(_) => report.mismatched.push(output.path.clone()),
            Err(_) => report.missing.push(output.path.clone()),
        }
    }
    println!("{}", serde_json::to_string(&report).expect("report serializes"));
    if report.mismatched.is_empty() && report.missing.is_empty() && code == manifest.exit_code {
        Ok(0)
    } else {
        Err(CliError::new(
            ErrorKind::Mismatch,
            format!(
                "{} mismatched, {} missing output(s); exit code {code} vs recorded {}",
                report.mismatched.len(),
                report.missing.len(),
                manifest.exit_code
            ),
        ))
    }
}
