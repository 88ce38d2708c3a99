use thiserror::Error;

/// Errors surfaced by simulators, signal processing, and file I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid {what}: {why}")]
    InvalidInput { what: &'static str, why: String },

    #[error("system too large: {n_spins} spins (limit {limit}); Hilbert dimension would be 2^{n_spins}")]
    DimensionGuard { n_spins: usize, limit: usize },

    #[error("empty system: operation requires at least {needed} spins, got {got}")]
    EmptySystem { needed: usize, got: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("numerical integrity violated: {what} = {value:.3e} exceeds {limit:.3e}")]
    NumericalIntegrity {
        what: &'static str,
        value: f64,
        limit: f64,
    },

    #[error("aliasing guard: sample_rate {sample_rate} Hz < 4 x f_het {f_het} Hz")]
    AliasingGuard { sample_rate: f64, f_het: f64 },

    #[error("carrier {f_het} Hz outside representable band [0, {nyquist}] Hz")]
    CarrierOutOfBand { f_het: f64, nyquist: f64 },

    #[error("fit did not converge after {iterations} iterations (residual {residual:.3e})")]
    FitDiverged { iterations: usize, residual: f64 },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("malformed record container at byte {offset}: {why}")]
    MalformedContainer { offset: usize, why: String },

    #[error("unsupported waveform for this engine: {0}")]
    UnsupportedWaveform(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(what: &'static str, why: impl Into<String>) -> Self {
        Error::InvalidInput {
            what,
            why: why.into(),
        }
    }
}
