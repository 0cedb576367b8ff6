//! Process exit codes: 1 bad configuration or input, 2 violated invariant,
//! 3 tolerance not met.

use std::fmt;
use zkflat::Error;

pub const CONFIG: u8 = 1;
pub const INVARIANT: u8 = 2;
pub const TOLERANCE: u8 = 3;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn config(message: impl Into<String>) -> Failure {
        Failure {
            code: CONFIG,
            message: message.into(),
        }
    }

    pub fn invariant(message: impl Into<String>) -> Failure {
        Failure {
            code: INVARIANT,
            message: message.into(),
        }
    }

    pub fn tolerance(message: impl Into<String>) -> Failure {
        Failure {
            code: TOLERANCE,
            message: message.into(),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Failure {
        let code = match e {
            Error::InvalidParam { .. }
            | Error::Parse(_)
            | Error::Io(_)
            | Error::Json(_)
            | Error::TableOutOfRange { .. }
            | Error::ModeOutOfRange { .. } => CONFIG,
            _ => INVARIANT,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Failure {
        Failure::config(e.to_string())
    }
}
