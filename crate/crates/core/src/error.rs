use thiserror::Error;

use crate::kernel::SdpSolution;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("unbounded: {0}")]
    Unbounded(String),

    /// The splitting solver hit its iteration cap. The best iterate is kept
    /// so callers can inspect residuals or use it anyway.
    #[error(
        "SDP solver did not converge after {} iterations (primal residual {:.3e})",
        .0.iterations,
        .0.primal_residual
    )]
    NotConverged(Box<SdpSolution>),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
