//! Exit codes: 0 success, 1 usage or config, 2 data or schema, 3 numeric.

use std::fmt;

use fh_tabnet::Error;

pub const USAGE: i32 = 1;
pub const DATA: i32 = 2;
pub const NUMERIC: i32 = 3;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: USAGE,
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self {
            code: DATA,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

/// Maps a library error onto the exit-code classes.
pub fn code_for(err: &Error) -> i32 {
    match err {
        Error::Spec { .. } => USAGE,
        Error::Numeric(_) | Error::Dimension(_) | Error::Tape(_) | Error::BatchSize(_) => NUMERIC,
        _ => DATA,
    }
}

impl From<Error> for CliError {
    fn from(err: Error) -> Self {
        Self {
            code: code_for(&err),
            message: err.to_string(),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(err: serde_json::Error) -> Self {
        Self::data(err.to_string())
    }
}
