//! Crate-wide error type and the process exit-code mapping used by the CLI.

use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or out-of-contract input (bad dimensions, non-finite
    /// entries, invalid configuration values, unparsable files).
    #[error("input error: {0}")]
    Input(String),

    /// A bound form was requested whose stated hypothesis fails on the
    /// given spectrum (e.g. the uniform-gap subspace form).
    #[error("hypothesis not satisfied: {0}")]
    Hypothesis(String),

    /// The unperturbed target is not identifiable (tied singular values at
    /// the cut index), so an error measurement would be meaningless.
    #[error("degenerate truth: {0}")]
    DegenerateTruth(String),

    /// A numerical routine failed to converge or produced non-finite output.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// The SDE integrator could not keep singular values separated at the
    /// configured floor, even after exhausting step-halving retries.
    #[error("singular value collision at t={t}, pair index {index}, sigma={sigma:?}")]
    Collision {
        t: f64,
        index: usize,
        sigma: Vec<f64>,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Process exit code: 2 for input/validation problems, 3 for numeric or
    /// collision failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Input(_) | Error::Hypothesis(_) | Error::DegenerateTruth(_) | Error::Io { .. } => 2,
            Error::Numeric(_) | Error::Collision { .. } => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
