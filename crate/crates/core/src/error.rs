use thiserror::Error;

/// Errors raised by the simulator library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A parameter is outside its accepted range.
    #[error("invalid {name}: {message}")]
    Validation { name: String, message: String },

    /// Transmitter and receiver coincide, or the receiver is not below the emitter.
    #[error("degenerate link geometry: {0}")]
    DegenerateGeometry(String),

    /// More users than transmit elements.
    #[error("zero-forcing infeasible: {users} users but only {elements} transmit elements")]
    Infeasible { users: usize, elements: usize },

    /// Channel rows are linearly dependent.
    #[error("channel matrix is rank deficient (rank {rank}); dependent users {users:?}")]
    RankDeficient { rank: usize, users: Vec<usize> },

    /// A precoder was requested for an all-zero channel.
    #[error("channel matrix is identically zero")]
    ZeroChannel,

    #[error("aggregation over zero successful trials")]
    NoSuccessfulTrials,

    #[error("config: {0}")]
    Config(String),

    #[error("io: {0}")]
    Io(String),

    /// A decode plan disagrees with the SINR expression it describes.
    #[error("decode plan inconsistent: {0}")]
    DecodePlan(String),
}

impl Error {
    pub(crate) fn validation(name: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            name: name.into(),
            message: message.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
