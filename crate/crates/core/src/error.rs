//! Error type shared by every module of the core crate.

use alloc::string::String;

/// Domain and numerical failures.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("subsystem index {index} out of range for {count} subsystems")]
    Subsystem { index: usize, count: usize },
    #[error("matrix is not Hermitian (deviation {0:.3e})")]
    NotHermitian(f64),
    #[error("operator is not an isometry (deviation {0:.3e})")]
    NotIsometry(f64),
    #[error("Kraus operators are not trace preserving (deviation {0:.3e})")]
    NotTracePreserving(f64),
    #[error("invalid channel: {0}")]
    InvalidChannel(String),
    #[error("invalid superchannel: {0}")]
    InvalidSuperchannel(String),
    #[error("invalid comb: {0}")]
    InvalidComb(String),
    #[error("unsupported number of slots: {0} (only 1 and 2 are implemented)")]
    UnsupportedSlots(usize),
    #[error("invalid bipartition: {0}")]
    InvalidBipartition(String),
    #[error("realizations do not describe the same superchannel (residual {0:.3e})")]
    NotAligned(f64),
    #[error("realization residual {0:.3e} exceeds tolerance")]
    Realization(f64),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("conic program malformed: {0}")]
    Model(String),
    #[error("solver did not reach optimality: {0}")]
    Solver(String),
}

/// Crate-wide result alias.
pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn dim_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Dimension(msg.into()))
}
