use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("range error: {0}")]
    Range(String),

    #[error("truncation tolerance {tol:e} not attainable: best bound {achieved:e} at radius {radius}")]
    Convergence { tol: f64, achieved: f64, radius: u64 },

    #[error("input error: {0}")]
    Input(String),

    #[error("sites {first} and {second} coincide on the torus (distance {distance:e})")]
    DuplicateSites { first: usize, second: usize, distance: f64 },

    #[error("factorization failed: smallest pivot {pivot:e} at row {row}")]
    Factorization { pivot: f64, row: usize },

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("schedule is not convergent: margin r = {margin} (use --force to run anyway)")]
    InfeasibleSchedule { margin: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("{path}:{line}: {msg}")]
    Parse { path: String, line: usize, msg: String },

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Process exit status for the command-line tool: 2 for bad input,
    /// 3 for numerical failures, 4 for refused schedules.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InfeasibleSchedule { .. } => 4,
            Error::Numerical(_) | Error::Factorization { .. } | Error::Convergence { .. } => 3,
            _ => 2,
        }
    }
}
