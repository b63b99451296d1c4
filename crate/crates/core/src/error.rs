use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("space mismatch")]
    SpaceMismatch,

    /// The quadrature rule could not integrate one of the densities to one.
    #[error("quadrature did not converge (normalization residual {residual:.3e})")]
    QuadratureNonConvergence { residual: f64 },

    #[error("candidate `{id}` is not normalized (residual {residual:.3e})")]
    NotNormalized { id: String, residual: f64 },

    #[error("candidate `{id}` produced a NaN log-density")]
    InvalidDensity { id: String },

    #[error("model is empty")]
    EmptyModel,

    #[error("duplicate candidate id `{0}`")]
    DuplicateId(String),

    #[error("insufficient data for spacing: s = {s} exceeds s_max = {s_max} for n = {n}")]
    InsufficientData { n: usize, s: usize, s_max: usize },

    #[error("transition matrix is not irreducible and aperiodic")]
    NotErgodic,

    #[error("model budget exceeded: {count} candidates > budget {budget}")]
    BudgetExceeded { count: usize, budget: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("independence assumption violated: {0}")]
    Independence(String),

    #[error("parse error at line {line}, field `{field}`: {message}")]
    Parse {
        line: usize,
        field: String,
        message: String,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
