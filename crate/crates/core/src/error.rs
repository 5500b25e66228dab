use thiserror::Error;

/// Error type shared by every stage of the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied value violates an operation's preconditions.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The data itself cannot support the requested computation
    /// (constant columns, single-class labels, too few points, ...).
    #[error("degenerate data: {0}")]
    DegenerateData(String),

    /// Requested dimension exceeds the embedded direction-number table.
    #[error("unsupported dimension: {0}")]
    UnsupportedDimension(String),

    /// A numerical routine failed to converge or factorize.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Failure propagated out of a pipeline stage, tagged with the stage name.
    #[error("{stage} stage: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn degenerate(msg: impl Into<String>) -> Self {
        Error::DegenerateData(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
