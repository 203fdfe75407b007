use std::path::PathBuf;

/// Errors surfaced by the workbench.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("index {index} out of range (limit {limit})")]
    IndexOutOfRange { index: usize, limit: usize },

    #[error("covariance for user {user} is not positive semidefinite (min eigenvalue {min_eigenvalue:e})")]
    NotPsd { user: usize, min_eigenvalue: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("solver did not converge after {iterations} iterations (gap {gap:e}, feasibility {feasibility:e})")]
    NonConvergence {
        iterations: usize,
        gap: f64,
        feasibility: f64,
    },

    #[error("experiment: {failed} of {total} rows failed")]
    Experiment { failed: usize, total: usize },

    #[error("config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl Error {
    /// Short machine-readable tag used by the CLI error line.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid-input",
            Error::IndexOutOfRange { .. } => "index-out-of-range",
            Error::NotPsd { .. } => "not-psd",
            Error::Numerical(_) => "numerical",
            Error::NonConvergence { .. } => "non-convergence",
            Error::Experiment { .. } => "experiment",
            Error::Config(_) => "config",
            Error::Io { .. } => "io",
            Error::Csv { .. } => "csv",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
