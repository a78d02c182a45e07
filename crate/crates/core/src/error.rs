use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("horizon too long for a single exponential (||A||*T = {norm_t:.3} > {limit}); split the horizon into segments")]
    Horizon { norm_t: f64, limit: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("degenerate terminal variance: {0}")]
    Degenerate(String),

    #[error("direction is not reachable with finite energy (R^2 = {r_squared:e})")]
    Infeasible { r_squared: f64 },

    #[error("target probability {target} exceeds the event's ceiling {ceiling}")]
    InfeasibleTarget { target: f64, ceiling: f64 },

    #[error("unsupported control law: {0}")]
    UnsupportedLaw(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for the CLI: 2 input, 3 infeasible, 4 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Infeasible { .. } | Error::InfeasibleTarget { .. } => 3,
            Error::Horizon { .. } | Error::Numerical(_) | Error::Degenerate(_) => 4,
            Error::Dimension(_)
            | Error::Domain(_)
            | Error::Config(_)
            | Error::UnsupportedLaw(_)
            | Error::Io(_)
            | Error::Json(_) => 2,
        }
    }
}
