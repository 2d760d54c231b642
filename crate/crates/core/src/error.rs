use std::fmt;

/// Errors produced by the contest library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// The participating mass does not exceed the budget, so every effort wins.
    #[error("budget not binding: total mass {mass} <= k = {k}")]
    BudgetNotBinding { mass: f64, k: f64 },
    #[error("unsupported operation: {0}")]
    Unsupported(&'static str),
    /// A numerical procedure failed to converge or produced a non-finite value.
    #[error("numeric error: {0}")]
    Numeric(String),
    /// Malformed tabular input, with the 1-based line number of the offending row.
    #[error("{source_name}, line {line}: {msg}")]
    Parse {
        source_name: String,
        line: usize,
        msg: String,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn domain(msg: impl fmt::Display) -> Self {
        Error::Domain(msg.to_string())
    }

    pub(crate) fn parse(source_name: &str, line: usize, msg: impl fmt::Display) -> Self {
        Error::Parse {
            source_name: source_name.to_string(),
            line,
            msg: msg.to_string(),
        }
    }
}
