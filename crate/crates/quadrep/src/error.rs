use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("singular form: det F = 0")]
    SingularForm,

    #[error("invalid form: {0}")]
    InvalidForm(String),

    #[error("eigen-iteration did not converge after {0} sweeps")]
    EigenNonConvergence(usize),

    #[error("{0} and {1} are not coprime")]
    NonCoprime(i64, i64),

    #[error("work budget exceeded: {needed} summands, budget {budget}")]
    BudgetExceeded { needed: u128, budget: u128 },

    #[error("quadrature tolerance {tol} not reached within {panels} panels (error estimate {err})")]
    QuadratureTolerance { tol: f64, err: f64, panels: usize },

    #[error("local density did not stabilize at k = {k}: last values {last:?}")]
    NonStabilized { k: u32, last: [f64; 2] },

    #[error("unbounded or empty region")]
    BadRegion,

    #[error("argument out of range: {0}")]
    OutOfRange(String),

    #[error("modulus {m} too small: max |F(x) - N| over the window is {max_dev}")]
    ModulusTooSmall { m: i64, max_dev: i64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
