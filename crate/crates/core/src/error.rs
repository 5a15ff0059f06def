use thiserror::Error;

/// Errors raised by the laboratory.
#[derive(Debug, Error)]
pub enum Error {
    /// A Borel function evaluated to a non-finite value on an occupied mode.
    #[error("function is not finite on mode {mode:?} (eigenvalue {eigenvalue}): got {value}")]
    Domain {
        mode: Vec<i32>,
        eigenvalue: f64,
        value: f64,
    },

    #[error("invalid argument: {0}")]
    Argument(String),

    /// The damping specification violates its own invariants (e.g. a negative coefficient).
    #[error("invalid damping specification: {0}")]
    Spec(String),

    /// The damping specification is incompatible with the spectral model.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("energy increased at step {step} (t = {time}): {before:e} -> {after:e}")]
    Integrator {
        step: usize,
        time: f64,
        before: f64,
        after: f64,
    },

    #[error("frequency {requested} exceeds the truncation guard {guard}")]
    Guard { guard: f64, requested: f64 },

    #[error("fit window exhausted: {0}")]
    WindowExhausted(String),

    #[error("too few rows for fit: need {needed}, have {have}")]
    TooFewRows { needed: usize, have: usize },

    #[error("linear algebra failure: {0}")]
    Linalg(String),

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
