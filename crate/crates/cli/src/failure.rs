use std::fmt;
use std::path::Path;

use qhenn_core::Error;

/// A failed command, classified by exit code.
#[derive(Debug)]
pub enum Failure {
    /// Bad flags or configuration (exit 1).
    Usage(String),
    /// A precondition or self-check did not hold (exit 2).
    Contract(String),
    /// Reading or writing a file failed (exit 3).
    Io(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Contract(_) => 2,
            Failure::Io(_) => 3,
        }
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        Failure::Io(format!("{}: {e}", path.display()))
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "usage error: {m}"),
            Failure::Contract(m) => write!(f, "error: {m}"),
            Failure::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Io(io) => Failure::Io(io.to_string()),
            Error::Config(m) => Failure::Usage(m),
            other => Failure::Contract(other.to_string()),
        }
    }
}

pub type Outcome<T = ()> = Result<T, Failure>;
