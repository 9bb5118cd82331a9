use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid problem spec: {0}")]
    InvalidSpec(String),

    /// Exhaustive enumeration was asked for more bits than it can afford.
    #[error("enumeration budget exceeded: n = {n} (max {max})")]
    Budget { n: usize, max: usize },

    /// No action with positive improvement probability exists at `state`.
    #[error("improper policy at state {state}: termination is unreachable")]
    ImproperPolicy { state: usize },

    /// Greedy extraction from a Q-table that never visited some states.
    #[error("incomplete Q-table: unvisited states {states:?}")]
    IncompleteTable { states: Vec<usize> },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// Every Monte Carlo episode hit the step cap.
    #[error("all {runs} episodes truncated at the step cap (improper policy suspected)")]
    AllTruncated { runs: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: msg.into(),
        }
    }
}
