use thiserror::Error;

/// Errors raised by the simulator.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("unsupported dimension {0} (expected 2 or 4)")]
    UnsupportedDimension(usize),
    #[error("expected {expected} entries, got {got}")]
    EntryCount { expected: usize, got: usize },
    #[error("non-finite matrix entry")]
    NonFinite,
    #[error("ket not normalized: squared norm {0}")]
    NotNormalized(f64),
    #[error("numerical integrity violated: {0}")]
    NumericalIntegrity(String),
    #[error("invalid density matrix: {0}")]
    InvalidDensity(String),
    #[error("invalid channel `{name}`: {reason}")]
    InvalidChannel { name: String, reason: String },
    #[error("parameter `{name}` = {value} outside {range}")]
    ParameterOutOfRange {
        name: &'static str,
        value: f64,
        range: &'static str,
    },
    #[error("degenerate channel: B1 + B2 vanishes, chi undefined")]
    DegenerateChannel,
    #[error("phase {0} rad outside the small-signal regime |phi| <= 0.3")]
    OutOfRegime(f64),
    #[error("undecodable sample: composition denominator {0:e}")]
    Undecodable(f64),
    #[error("ill-conditioned estimate: {0}")]
    IllConditioned(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("invalid counts: {0}")]
    InvalidCounts(String),
    #[error("invalid ensemble: {0}")]
    InvalidEnsemble(String),
    #[error("no decodable records")]
    NoData,
    #[error("{0}")]
    Usage(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
