use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid sample: {0}")]
    InvalidSample(String),

    #[error("quadrature did not reach tolerance {tol:e} (estimated error {estimate:e}) on [{lo}, {hi}]")]
    Quadrature {
        lo: f64,
        hi: f64,
        tol: f64,
        estimate: f64,
    },

    #[error("kernel table tolerance {tol:e} needs {needed} grid points, limit is {limit}")]
    ToleranceUnattainable { tol: f64, needed: usize, limit: usize },

    #[error("no plateau: bandwidth criterion never triggered below frequency {max_freq}; extend the frequency range")]
    NoPlateau { max_freq: f64 },

    #[error("bias integral diverges: tabulated |phi| does not decay (fitted tail exponent {exponent})")]
    DivergentTail { exponent: f64 },

    #[error("deficiency undefined: {0}")]
    MismatchedExpansions(String),

    #[error("degenerate distribution: {0}")]
    Degenerate(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn sample(msg: impl Into<String>) -> Self {
        Error::InvalidSample(msg.into())
    }
}
