//! Error taxonomy and exit-code mapping.
//!
//! Numerical failures (domain violations, non-convergence, guard trips) map to
//! exit code 3, comparison failures to 1, usage and serialization problems to
//! 2. Success is 0. The CLI relies on this mapping; library callers match on
//! the variants.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Input outside the mathematical domain of an operation
    /// (e.g. polylog argument on the branch cut, radius out of range).
    #[error("domain error: {0}")]
    Domain(String),

    /// An iteration failed to reach its tolerance within its step budget.
    #[error("convergence failure: {0}")]
    NonConvergence(String),

    /// Bethe root set could not be partitioned or roots collided.
    #[error("root partition failure: {0}")]
    Partition(String),

    /// A value left the representable range of the active precision.
    #[error("numeric overflow: {0}")]
    Overflow(String),

    /// A linear solve hit a numerically singular matrix.
    #[error("singular matrix: {0}")]
    Singular(String),

    /// A size guard tripped (state space or node count beyond safe bounds).
    #[error("size guard: {0}")]
    SizeGuard(String),

    /// A comparison between two tables found disagreement beyond tolerance.
    #[error("comparison failed: {0}")]
    Comparison(String),

    /// Invalid command-line usage or inconsistent options.
    #[error("usage error: {0}")]
    Usage(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code the CLI maps this error to.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Comparison(_) => 1,
            Error::Usage(_) | Error::Io(_) | Error::Csv(_) | Error::Json(_) => 2,
            Error::Domain(_)
            | Error::NonConvergence(_)
            | Error::Partition(_)
            | Error::Overflow(_)
            | Error::Singular(_)
            | Error::SizeGuard(_) => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_partition_the_taxonomy() {
        assert_eq!(Error::Comparison("x".into()).exit_code(), 1);
        assert_eq!(Error::Usage("x".into()).exit_code(), 2);
        assert_eq!(Error::Domain("x".into()).exit_code(), 3);
        assert_eq!(Error::NonConvergence("x".into()).exit_code(), 3);
        assert_eq!(Error::Partition("x".into()).exit_code(), 3);
        assert_eq!(Error::Singular("x".into()).exit_code(), 3);
        assert_eq!(Error::SizeGuard("x".into()).exit_code(), 3);
    }
}
