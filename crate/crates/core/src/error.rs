use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Failure modes shared by every analysis module.
///
/// Each variant maps to a stable machine-readable code (see [`Error::code`])
/// so that run records can report diagnostics without parsing messages.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("out of range: {0}")]
    Range(String),

    #[error("symmetric eigensolver did not converge (order {order}, {max_iter} sweeps)")]
    EigenNonConvergence { order: usize, max_iter: usize },

    #[error("{what}: estimated size {estimate} exceeds cap {cap}")]
    SizeCap { what: &'static str, estimate: u128, cap: u128 },

    #[error("not found: {0}")]
    NotFound(String),

    #[error("tolerance not met: achieved {achieved:e}, requested {requested:e}")]
    Tolerance { achieved: f64, requested: f64 },

    #[error("inconclusive: value {value:e} with error bound {bound:e}")]
    Inconclusive { value: f64, bound: f64 },

    #[error("precision exhausted at {bits} bits: {detail}")]
    PrecisionExhausted { bits: usize, detail: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("record schema mismatch: {0}")]
    Schema(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub fn code(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::InvalidParams(_) => "invalid_params",
            Error::Precondition(_) => "precondition",
            Error::Range(_) => "range",
            Error::EigenNonConvergence { .. } => "eigen_nonconvergence",
            Error::SizeCap { .. } => "size_cap",
            Error::NotFound(_) => "not_found",
            Error::Tolerance { .. } => "tolerance",
            Error::Inconclusive { .. } => "inconclusive",
            Error::PrecisionExhausted { .. } => "precision_exhausted",
            Error::Config(_) => "config",
            Error::Schema(_) => "schema",
            Error::Io(_) => "io",
        }
    }

    /// Configuration problems, as opposed to numerical diagnostics.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_) | Error::InvalidParams(_) | Error::Schema(_) | Error::Io(_))
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Schema(e.to_string())
    }
}
