use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("config: {0}")]
    Config(String),

    #[error("record too short: need at least {needed} samples, got {got}")]
    TooShort { needed: usize, got: usize },

    #[error("frequency grids differ: {0}")]
    GridMismatch(String),

    #[error("time step too coarse: sample rate {sample_rate} Hz must exceed {required} Hz ({reason})")]
    StepTooCoarse {
        sample_rate: f64,
        required: f64,
        reason: &'static str,
    },

    #[error(transparent)]
    Fit(#[from] FitError),

    #[error("no resonance found: {0}")]
    NoPeak(String),

    #[error("bath spectral densities are equal; effective temperature is infinite")]
    InfiniteTemperature,

    #[error("unstable: {0}")]
    Unstable(String),
}

/// Failure modes of the nonlinear least-squares solver.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    /// Iteration budget exhausted. Carries the best parameters seen.
    #[error("no convergence after {iterations} iterations (best cost {cost:.6e}, parameters {best:?})")]
    NotConverged {
        iterations: usize,
        cost: f64,
        best: Vec<(String, f64)>,
    },

    /// The Jacobian at the optimum is rank deficient; `combination` names the
    /// direction in parameter space the data cannot constrain.
    #[error("degenerate Jacobian: the combination {combination} is not identifiable")]
    Degenerate { combination: String },

    #[error("parameter `{name}` hit its bound ({value:.6e}); {detail}")]
    AtBound { name: String, value: f64, detail: String },

    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
