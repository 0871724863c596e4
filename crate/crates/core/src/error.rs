use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("framing error: {0}")]
    Framing(String),

    #[error("subcarrier selection error: {0}")]
    Selection(String),

    #[error("packet capacity exceeded: {needed} symbols need {needed_ofdm} OFDM symbols, packet holds {capacity}")]
    Capacity {
        needed: usize,
        needed_ofdm: usize,
        capacity: usize,
    },

    #[error("GF(2) system unsolvable: inconsistent reduced row {row}")]
    Unsolvable { row: usize },

    #[error("replay check failed: {0}")]
    Replay(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("training failed: {0}")]
    Training(String),

    #[error("missing model checkpoint {path}; run `jscc-ofdm {command}` first")]
    MissingCheckpoint { path: String, command: &'static str },

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn framing(msg: impl Into<String>) -> Self {
        Error::Framing(msg.into())
    }
}
