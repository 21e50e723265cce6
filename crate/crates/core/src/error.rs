use thiserror::Error;

/// Errors raised by placement construction, query planning, decoding and
/// the experiment harness.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("message length incompatible with split: {0}")]
    MessageLengthIncompatible(String),

    #[error("{n} databases cannot be split into disjoint groups of size {t}")]
    NotDivisible { n: usize, t: usize },

    #[error("sub-message of {len} bits is not a positive multiple of the sub-packetization {required}")]
    Subpacketization { len: usize, required: usize },

    #[error("query asks database {database} for bit {address} which it does not store")]
    PrivacyBreakingQuery { database: usize, address: String },

    #[error("decode failure: {0}")]
    DecodeFailure(String),

    #[error("placement rejected: {0}")]
    InvalidPlacement(String),

    #[error("randomness space of {required} outcomes exceeds budget {budget}; use statistical mode")]
    BudgetExceeded { required: u128, budget: u128 },

    #[error("internal error: {0}")]
    Internal(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(err: serde_json::Error) -> Self {
        Error::Parse(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
