use std::io;

use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Tensor or image extents do not fit the operation.
    #[error("dimension error: {0}")]
    Dimension(String),
    /// A hyperparameter or configuration value is invalid.
    #[error("configuration error: {0}")]
    Config(String),
    /// A caller-side precondition was violated.
    #[error("contract error: {0}")]
    Contract(String),
    /// A file could not be decoded.
    #[error("format error: {0}")]
    Format(String),
    /// A coordinate or window lies outside its container.
    #[error("range error: {0}")]
    Range(String),
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

macro_rules! dim_err {
    ($($arg:tt)*) => { $crate::error::Error::Dimension(format!($($arg)*)) };
}
macro_rules! config_err {
    ($($arg:tt)*) => { $crate::error::Error::Config(format!($($arg)*)) };
}
macro_rules! contract_err {
    ($($arg:tt)*) => { $crate::error::Error::Contract(format!($($arg)*)) };
}
macro_rules! format_err {
    ($($arg:tt)*) => { $crate::error::Error::Format(format!($($arg)*)) };
}

pub(crate) use {config_err, contract_err, dim_err, format_err};
