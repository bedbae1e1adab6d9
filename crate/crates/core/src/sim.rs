//! Stochastic time-domain simulation of the linearized oscillator, cavity
//! and photothermal dynamics.
//!
//! Fluctuations are taken about the steady state, with the field phase
//! chosen so the mean amplitude α is real and positive. The optical force is
//! ħg(δn + βA·y), where δn = 2α·Re δa and y relaxes toward δn with time
//! constant τ_t. The thermal force is white with strength
//! [`thermal_force_amplitude`]; quantum input noise on the field is omitted.
//!
//! Two models:
//! * [`SimMode::Adiabatic`] replaces the field by its response to (x, ẋ),
//!   matched to the exact cavity transfer function at ω_m. State (x, v, y).
//! * [`SimMode::FullCavity`] integrates δȧ = −(κ − iΔ)δa + igαx.
//!   State (x, v, Re δa, Im δa, y).
//!
//! States that cannot influence x are dropped: y when βA = 0 or τ_t = 0
//! (τ_t = 0 folds the photothermal force into a factor 1 + βA), and the
//! field when α = 0 or g = 0.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use sha2::{Digest, Sha256};

use crate::config::{fmt_f64, Config};
use crate::error::{invalid, Error, Result};
use crate::model::{MechanicalMode, SystemParams, HBAR, K_B};

/// Minimum samples per period of the fastest resolved rate.
pub const OVERSAMPLING: f64 = 20.0;

const THERMAL_STREAM: u64 = 1;
const SHOT_STREAM: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SimMode {
    #[default]
    Adiabatic,
    FullCavity,
}

impl SimMode {
    pub fn name(&self) -> &'static str {
        match self {
            SimMode::Adiabatic => "adiabatic",
            SimMode::FullCavity => "full",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "adiabatic" => Ok(SimMode::Adiabatic),
            "full" | "full-cavity" => Ok(SimMode::FullCavity),
            other => Err(invalid("mode", format!("expected adiabatic or full, got {other:?}"))),
        }
    }
}

/// Update rule for one sample interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Integrator {
    /// Exact discretization of the linear SDE: the transition matrix is
    /// e^{M·dt} and the added noise has exactly the covariance accumulated
    /// over one interval. Stationary statistics carry no step-size bias.
    #[default]
    Exact,
    /// x ← x + M·x·dt + B·√dt·ξ. Energy of an undamped oscillator grows by
    /// (ω_m·dt)² per step, so this needs ω_m²·dt ≪ Γ_m to be meaningful.
    EulerMaruyama,
}

impl Integrator {
    pub fn name(&self) -> &'static str {
        match self {
            Integrator::Exact => "exact",
            Integrator::EulerMaruyama => "euler-maruyama",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Integrator::Exact),
            "euler-maruyama" | "euler" | "em" => Ok(Integrator::EulerMaruyama),
            other => Err(invalid(
                "integrator",
                format!("expected exact or euler-maruyama, got {other:?}"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub params: SystemParams,
    /// s
    pub duration: f64,
    /// Hz
    pub sample_rate: f64,
    pub seed: u64,
    pub mode: SimMode,
    pub integrator: Integrator,
    /// Double-sided displacement-equivalent PSD of the detection noise, m²/Hz.
    pub shot_noise_floor: f64,
}

impl SimConfig {
    pub fn new(params: SystemParams, duration: f64, sample_rate: f64, seed: u64) -> Self {
        Self {
            params,
            duration,
            sample_rate,
            seed,
            mode: SimMode::Adiabatic,
            integrator: Integrator::Exact,
            shot_noise_floor: 0.0,
        }
    }

    pub fn sample_count(&self) -> usize {
        (self.duration * self.sample_rate).round() as usize
    }

    /// Lowest accepted sample rate, Hz (exclusive).
    pub fn required_sample_rate(&self) -> f64 {
        match self.mode {
            SimMode::Adiabatic => OVERSAMPLING * self.params.mode.frequency_hz(),
            SimMode::FullCavity => {
                let kappa_hz = self.params.cavity.kappa() / std::f64::consts::TAU;
                OVERSAMPLING * kappa_hz.max(self.params.mode.frequency_hz())
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(invalid("duration", format!("must be > 0, got {}", self.duration)));
        }
        if !(self.sample_rate > 0.0 && self.sample_rate.is_finite()) {
            return Err(invalid("sample_rate", format!("must be > 0, got {}", self.sample_rate)));
        }
        if !(self.shot_noise_floor >= 0.0 && self.shot_noise_floor.is_finite()) {
            return Err(invalid(
                "shot_noise_floor",
                format!("must be finite and >= 0, got {}", self.shot_noise_floor),
            ));
        }
        if self.sample_count() == 0 {
            return Err(invalid("duration", "shorter than one sample"));
        }
        let required = self.required_sample_rate();
        if self.sample_rate <= required {
            return Err(Error::StepTooCoarse {
                sample_rate: self.sample_rate,
                required,
                reason: match self.mode {
                    SimMode::Adiabatic => "20 samples per mechanical period",
                    SimMode::FullCavity => "20 samples per cavity decay time 2π/κ",
                },
            });
        }
        Ok(())
    }

    /// Canonical text of every input that affects the output.
    pub fn canonical_text(&self) -> String {
        let mut s = Config::new(self.params, self.seed).to_text();
        let _ = writeln!(s, "duration_s = {}", fmt_f64(self.duration));
        let _ = writeln!(s, "sample_rate_hz = {}", fmt_f64(self.sample_rate));
        let _ = writeln!(s, "mode = \"{}\"", self.mode.name());
        let _ = writeln!(s, "integrator = \"{}\"", self.integrator.name());
        let _ = writeln!(s, "shot_noise_floor = {}", fmt_f64(self.shot_noise_floor));
        s
    }

    /// SHA-256 of [`canonical_text`](Self::canonical_text), lowercase hex.
    pub fn config_hash(&self) -> String {
        let digest = Sha256::digest(self.canonical_text().as_bytes());
        digest.iter().fold(String::with_capacity(64), |mut acc, b| {
            let _ = write!(acc, "{b:02x}");
            acc
        })
    }
}

/// √(2·Γ_m·m_eff·k_B·T), N·s^½.
pub fn thermal_force_amplitude(mode: &MechanicalMode) -> f64 {
    (2.0 * mode.gamma_m() * mode.m_eff() * K_B * mode.temperature()).sqrt()
}

/// Physical state. Components the model does not carry are zero.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SimState {
    /// m
    pub x: f64,
    /// m/s
    pub v: f64,
    /// photons
    pub y_pt: f64,
    pub a_re: f64,
    pub a_im: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimTrace {
    /// s
    pub t0: f64,
    /// s
    pub dt: f64,
    /// m
    pub x: Vec<f64>,
    /// x plus detection noise, m
    pub homodyne: Vec<f64>,
    pub seed: u64,
    pub config_hash: String,
    /// Integration produced a non-finite value; the trace stops before it.
    pub unstable: bool,
}

impl SimTrace {
    pub fn sample_rate(&self) -> f64 {
        1.0 / self.dt
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

/// Which optional components the state vector carries, and where.
#[derive(Debug, Clone, Copy)]
struct Layout {
    field: Option<usize>,
    y: Option<usize>,
    n: usize,
}

const MAX_DIM: usize = 5;

/// Continuous model in scaled coordinates: ṡ = M·s + b·ξ(t).
struct Model {
    layout: Layout,
    drift: DMatrix<f64>,
    noise: DVector<f64>,
    /// Physical value of one unit of each scaled component.
    scale: Vec<f64>,
}

fn build_model(params: &SystemParams, mode: SimMode) -> Model {
    let m = &params.mode;
    let w = m.omega_m();
    let gamma = m.gamma_m();
    let alpha = params.intracavity_amplitude().norm();
    let g = params.coupling.g();
    let kappa = params.cavity.kappa();
    let delta = params.cavity.detuning();
    let beta_a = params.coupling.beta_a();
    let tau = params.coupling.tau_t();
    let force_per_photon = HBAR * g / m.m_eff();

    let coupled = alpha > 0.0 && g != 0.0;
    let has_y = coupled && beta_a != 0.0 && tau > 0.0;
    let has_field = coupled && mode == SimMode::FullCavity;
    // Weight of δn in the force once y is or is not explicit.
    let direct = if has_y { 1.0 } else { 1.0 + beta_a };

    let mut next = 2;
    let field = has_field.then(|| {
        next += 2;
        next - 2
    });
    let y = has_y.then(|| {
        next += 1;
        next - 1
    });
    let layout = Layout { field, y, n: next };

    let x_s = m.zero_point_motion();
    let a_s = (g * alpha * x_s / kappa).abs().max(f64::MIN_POSITIVE);
    let y_s = 2.0 * alpha * a_s;
    let mut scale = vec![x_s, w * x_s];
    if layout.field.is_some() {
        scale.extend([a_s, a_s]);
    }
    if layout.y.is_some() {
        scale.push(y_s);
    }

    let n = layout.n;
    let mut p = DMatrix::<f64>::zeros(n, n);
    p[(0, 1)] = 1.0;
    p[(1, 0)] = -w * w;
    p[(1, 1)] = -gamma;
    // δn as a linear form in the physical state.
    let mut dn = vec![0.0; n];
    if coupled {
        match layout.field {
            Some(fi) => {
                dn[fi] = 2.0 * alpha;
                p[(fi, fi)] = -kappa;
                p[(fi, fi + 1)] = -delta;
                p[(fi + 1, fi + 1)] = -kappa;
                p[(fi + 1, fi)] = delta;
                p[(fi + 1, 0)] = g * alpha;
            }
            None => {
                // 1/D(ω)D*(−ω) at ω_m, split into parts in phase with x and ẋ.
                let k = kappa * kappa + delta * delta - w * w;
                let r = Complex64::new(1.0, 0.0) / Complex64::new(k, 2.0 * kappa * w);
                let pre = -2.0 * g * delta * alpha * alpha;
                dn[0] = pre * r.re;
                dn[1] = pre * r.im / w;
            }
        }
        for j in 0..n {
            p[(1, j)] += force_per_photon * direct * dn[j];
        }
        if let Some(yi) = layout.y {
            p[(1, yi)] += force_per_photon * beta_a;
            for j in 0..n {
                p[(yi, j)] += dn[j] / tau;
            }
            p[(yi, yi)] -= 1.0 / tau;
        }
    }
    let mut b = DVector::<f64>::zeros(n);
    b[1] = thermal_force_amplitude(m) / m.m_eff();

    let drift = DMatrix::from_fn(n, n, |i, j| p[(i, j)] * scale[j] / scale[i]);
    let noise = DVector::from_fn(n, |i, _| b[i] / scale[i]);
    Model {
        layout,
        drift,
        noise,
        scale,
    }
}

fn symmetric_sqrt(q: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = (q + q.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| l.max(0.0).sqrt()));
    &eig.eigenvectors * d * eig.eigenvectors.transpose()
}

/// (F, Q_d) such that s_{k+1} = F·s_k + N(0, Q_d) exactly.
fn van_loan(drift: &DMatrix<f64>, noise: &DVector<f64>, dt: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = drift.nrows();
    let q = noise * noise.transpose();
    let mut c = DMatrix::<f64>::zeros(2 * n, 2 * n);
    c.view_mut((0, 0), (n, n)).copy_from(&(-drift * dt));
    c.view_mut((0, n), (n, n)).copy_from(&(q * dt));
    c.view_mut((n, n), (n, n)).copy_from(&(drift.transpose() * dt));
    let e = c.exp();
    let f = e.view((n, n), (n, n)).transpose();
    let qd = &f * e.view((0, n), (n, n));
    let qd = (&qd + qd.transpose()) * 0.5;
    (f, qd)
}

/// Solves P = F·P·Fᵀ + Q by repeated squaring; `None` if F is not contracting.
fn discrete_lyapunov(f: &DMatrix<f64>, q: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let mut a = f.clone();
    let mut p = q.clone();
    for _ in 0..200 {
        let next = &p + &a * &p * a.transpose();
        a = &a * &a;
        let done = a.norm() < 1e-18;
        p = next;
        if !p.iter().all(|v| v.is_finite()) {
            return None;
        }
        if done {
            return Some((&p + p.transpose()) * 0.5);
        }
    }
    None
}

/// Sample-by-sample simulator. Produces the same samples as [`simulate`]
/// whatever block sizes are requested.
pub struct Simulator {
    config: SimConfig,
    layout: Layout,
    scale: Vec<f64>,
    f: [[f64; MAX_DIM]; MAX_DIM],
    l: [[f64; MAX_DIM]; MAX_DIM],
    noise_cols: usize,
    state: [f64; MAX_DIM],
    stationary: Option<DMatrix<f64>>,
    thermal: ChaCha8Rng,
    shot: ChaCha8Rng,
    shot_sigma: f64,
    emitted: usize,
    total: usize,
    unstable: bool,
}

impl Simulator {
    pub fn new(config: &SimConfig) -> Result<Self> {
        config.validate()?;
        let model = build_model(&config.params, config.mode);
        let n = model.layout.n;
        let dt = 1.0 / config.sample_rate;

        let stable = model.drift.complex_eigenvalues().iter().all(|z| z.re < 0.0);
        let (f, l, cols, stationary) = match config.integrator {
            Integrator::Exact => {
                let (f, qd) = van_loan(&model.drift, &model.noise, dt);
                let stationary = if stable { discrete_lyapunov(&f, &qd) } else { None };
                (f, symmetric_sqrt(&qd), n, stationary)
            }
            Integrator::EulerMaruyama => {
                let f = DMatrix::identity(n, n) + &model.drift * dt;
                let l = DMatrix::from_column_slice(n, 1, (model.noise.clone() * dt.sqrt()).as_slice());
                // Stationary law of the continuous process, for the start state.
                let stationary = if stable {
                    let (fe, qe) = van_loan(&model.drift, &model.noise, dt);
                    discrete_lyapunov(&fe, &qe)
                } else {
                    None
                };
                (f, l, 1, stationary)
            }
        };
        let mut fa = [[0.0; MAX_DIM]; MAX_DIM];
        let mut la = [[0.0; MAX_DIM]; MAX_DIM];
        for i in 0..n {
            for j in 0..n {
                fa[i][j] = f[(i, j)];
            }
            for j in 0..cols {
                la[i][j] = l[(i, j)];
            }
        }

        let mut thermal = ChaCha8Rng::seed_from_u64(config.seed);
        thermal.set_stream(THERMAL_STREAM);
        let mut shot = ChaCha8Rng::seed_from_u64(config.seed);
        shot.set_stream(SHOT_STREAM);

        let mut state = [0.0; MAX_DIM];
        let z: Vec<f64> = (0..n).map(|_| thermal.sample(StandardNormal)).collect();
        match &stationary {
            Some(p) => {
                let root = symmetric_sqrt(p);
                for i in 0..n {
                    state[i] = (0..n).map(|j| root[(i, j)] * z[j]).sum();
                }
            }
            None => {
                // Bare equipartition; the instability takes over from there.
                let mode = &config.params.mode;
                let x_rms = mode.thermal_variance().sqrt();
                state[0] = z[0] * x_rms / model.scale[0];
                state[1] = z[1] * x_rms * mode.omega_m() / model.scale[1];
            }
        }

        let stationary = stationary.map(|p| DMatrix::from_fn(n, n, |i, j| p[(i, j)] * model.scale[i] * model.scale[j]));
        Ok(Self {
            config: *config,
            layout: model.layout,
            scale: model.scale,
            f: fa,
            l: la,
            noise_cols: cols,
            state,
            stationary,
            thermal,
            shot,
            shot_sigma: (config.shot_noise_floor * config.sample_rate).sqrt(),
            emitted: 0,
            total: config.sample_count(),
            unstable: false,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    /// Number of state components integrated (2, 3, 4 or 5).
    pub fn dimension(&self) -> usize {
        self.layout.n
    }

    pub fn has_photothermal_state(&self) -> bool {
        self.layout.y.is_some()
    }

    /// Stationary variance of x implied by the discretized model, m².
    /// `None` when the dynamics are unstable.
    pub fn stationary_variance(&self) -> Option<f64> {
        self.stationary.as_ref().map(|p| p[(0, 0)])
    }

    pub fn state(&self) -> SimState {
        let get = |i: Option<usize>| i.map_or(0.0, |i| self.state[i] * self.scale[i]);
        SimState {
            x: self.state[0] * self.scale[0],
            v: self.state[1] * self.scale[1],
            y_pt: get(self.layout.y),
            a_re: get(self.layout.field),
            a_im: get(self.layout.field.map(|i| i + 1)),
        }
    }

    /// Overwrites the state. Components the model does not carry are ignored.
    pub fn set_state(&mut self, s: &SimState) {
        self.state[0] = s.x / self.scale[0];
        self.state[1] = s.v / self.scale[1];
        if let Some(i) = self.layout.field {
            self.state[i] = s.a_re / self.scale[i];
            self.state[i + 1] = s.a_im / self.scale[i + 1];
        }
        if let Some(i) = self.layout.y {
            self.state[i] = s.y_pt / self.scale[i];
        }
    }

    pub fn remaining(&self) -> usize {
        if self.unstable {
            0
        } else {
            self.total - self.emitted
        }
    }

    pub fn is_unstable(&self) -> bool {
        self.unstable
    }

    /// Appends up to `max` samples to `x` and `homodyne`; returns how many.
    /// Returns fewer than requested only at the end of the run or when the
    /// integration has become non-finite.
    #[allow(clippy::needless_range_loop)]
    pub fn next_block(&mut self, max: usize, x: &mut Vec<f64>, homodyne: &mut Vec<f64>) -> usize {
        let n = self.layout.n;
        let cols = self.noise_cols;
        let count = max.min(self.remaining());
        let xs = self.scale[0];
        let mut z = [0.0; MAX_DIM];
        for k in 0..count {
            let xi = self.state[0] * xs;
            if !self.state[..n].iter().all(|v| v.is_finite()) {
                self.unstable = true;
                return k;
            }
            let noise: f64 = if self.shot_sigma > 0.0 {
                self.shot_sigma * self.shot.sample::<f64, _>(StandardNormal)
            } else {
                0.0
            };
            x.push(xi);
            homodyne.push(xi + noise);
            self.emitted += 1;

            for zj in z.iter_mut().take(cols) {
                *zj = self.thermal.sample(StandardNormal);
            }
            let mut next = [0.0; MAX_DIM];
            for i in 0..n {
                let mut acc = 0.0;
                for j in 0..n {
                    acc += self.f[i][j] * self.state[j];
                }
                for j in 0..cols {
                    acc += self.l[i][j] * z[j];
                }
                next[i] = acc;
            }
            self.state = next;
        }
        count
    }
}

/// Runs the whole configured duration.
pub fn simulate(config: &SimConfig) -> Result<SimTrace> {
    let mut sim = Simulator::new(config)?;
    let total = config.sample_count();
    let mut x = Vec::with_capacity(total);
    let mut homodyne = Vec::with_capacity(total);
    sim.next_block(total, &mut x, &mut homodyne);
    Ok(SimTrace {
        t0: 0.0,
        dt: 1.0 / config.sample_rate,
        x,
        homodyne,
        seed: config.seed,
        config_hash: config.config_hash(),
        unstable: sim.is_unstable(),
    })
}

/// Re-runs `config` after checking it hashes to `expected_hash`.
pub fn replay(config: &SimConfig, expected_hash: &str) -> Result<SimTrace> {
    let hash = config.config_hash();
    if hash != expected_hash {
        return Err(Error::Config(format!(
            "config hash {hash} does not match the recorded {expected_hash}"
        )));
    }
    simulate(config)
}

#[cfg(test)]
mod tests;
