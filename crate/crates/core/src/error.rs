use thiserror::Error;

/// Errors raised by the laboratory.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unusable resolution: {0}")]
    Resolution(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("non-finite value at node {index}")]
    NonFinite { index: usize },

    #[error("support exceeds planar grid: {0}")]
    Support(String),

    #[error("planar grid too large for direct summation: {cells} cells exceeds cap {cap}")]
    CellCap { cells: usize, cap: usize },

    #[error("input does not match the requested quantity: {0}")]
    Mismatch(String),

    #[error("sequence too short to fit a slope: {0} members, need at least 4")]
    TooShort(usize),

    #[error("time step unstable: {0}")]
    Unstable(String),

    #[error("energy is unbounded below for these parameters: {0}")]
    Unbounded(String),

    #[error("unknown quantity: {0}")]
    Unknown(String),

    #[error("divergence: {0}")]
    Divergence(String),
}

pub type Result<T> = std::result::Result<T, Error>;
