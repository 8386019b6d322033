use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The graph has no path between the two points.
    #[error("points {from} and {to} are not connected (infinite distance)")]
    InfiniteDistance { from: usize, to: usize },

    #[error("iteration limit of {iterations} reached (last residual {last})")]
    IterationLimit { iterations: usize, last: f64 },

    /// A measure that was expected to be a single atom is spread out.
    #[error("measure at t = {time} is not concentrated (variance {variance})")]
    NotConcentrated { time: f64, variance: f64 },

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
