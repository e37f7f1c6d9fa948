//! File formats, parallel evaluation and the command line for `pomrec-core`.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod hexfloat;
pub mod io;
pub mod parallel;
pub mod report;

/// A bad flag, config file or argument combination; exits with code 2.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}
