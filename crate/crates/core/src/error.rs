use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("series did not converge after {terms} terms (partial sum {partial_sum:e}, last term {last_term:e})")]
    NonConvergence {
        terms: usize,
        partial_sum: f64,
        last_term: f64,
    },

    #[error("quadrature did not reach tolerance: estimate {estimate:e}, error {error:e}")]
    Quadrature { estimate: f64, error: f64 },

    #[error("grid too narrow: tail mass estimate {tail_mass:e} exceeds {tolerance:e} (half width {half_width})")]
    GridTooNarrow {
        tail_mass: f64,
        tolerance: f64,
        half_width: f64,
    },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("kernel bound certificate failed: {0}")]
    Certificate(String),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("kernel table does not match the simulation grid: {0}")]
    KernelGridMismatch(String),

    #[error("non-finite field value at time step {step}, grid index {index}")]
    NonFinite { step: usize, index: usize },

    #[error("truncation level {0} overflows e^N")]
    TruncationOverflow(f64),

    #[error("fft failure: {0}")]
    Fft(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("coupling violated: {0}")]
    Coupling(String),

    #[error("empty ensemble")]
    EmptyEnsemble,

    #[error("configuration error: {0}")]
    Config(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors that come from floating point trouble rather than
    /// from bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonFinite { .. }
                | Error::NonConvergence { .. }
                | Error::Quadrature { .. }
                | Error::Certificate(_)
        )
    }
}
