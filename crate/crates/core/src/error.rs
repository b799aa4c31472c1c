use thiserror::Error;

/// Errors produced by the channel-modelling toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("port index {index} out of range for a {n}-port network")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("invalid port partition: {0}")]
    InvalidPartition(String),

    /// A resolvent `(I - L S)` could not be inverted. For passive inputs this cannot
    /// happen, so it points at a non-passive network.
    #[error("singular resolvent in {context} (spectral radius {spectral_radius:.6})")]
    SingularResolvent {
        context: &'static str,
        spectral_radius: f64,
    },

    #[error("network has no impedance representation: (I - S) is singular")]
    NoImpedanceRepresentation,

    #[error("singular matrix in {0}")]
    Singular(&'static str),

    #[error("load impedance {0} sits on the pole z = -z0")]
    ReflectionPole(num_complex::Complex64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("malformed Touchstone option line: {0}")]
    MalformedOptionLine(String),

    #[error("unsupported Touchstone parameter type `{0}` (only S is supported)")]
    UnsupportedParameter(String),

    #[error("Touchstone file contains no data")]
    EmptyData,

    #[error("degenerate dataset: {0}")]
    DegenerateDataset(String),

    #[error("loss became non-finite at iteration {iteration} (restart {restart})")]
    Diverged { restart: usize, iteration: usize },

    #[error("exhaustive search over {0} bits exceeds the 24-bit budget")]
    BudgetExceeded(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
