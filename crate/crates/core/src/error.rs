use std::path::PathBuf;

use crate::model::PeerId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("piece profiles have different widths ({left} vs {right})")]
    MismatchedPieceCount { left: usize, right: usize },

    #[error("invalid piece profile {0:?}: expected a non-empty string of 0/1")]
    InvalidProfile(String),

    #[error("peer {0} is not in the swarm")]
    UnknownPeer(PeerId),

    #[error("piece {piece} is not useful to peer {peer}")]
    NonUsefulTransfer { piece: usize, peer: PeerId },

    #[error("piece {piece} out of range for k={k}")]
    PieceOutOfRange { piece: usize, k: usize },

    #[error("invalid value for `{key}`: {reason}")]
    InvalidConfig { key: String, reason: String },

    #[error("sample grids differ between replications")]
    MismatchedGrids,

    #[error("fewer than two samples in [{lo}, {hi}]")]
    DegenerateWindow { lo: f64, hi: f64 },

    #[error("constants violate condition(s) {0:?}")]
    InvalidConstants(Vec<usize>),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: malformed CSV: {reason}")]
    Csv { path: PathBuf, reason: String },
}

impl Error {
    pub fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidConfig {
            key: key.into(),
            reason: reason.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// I/O failures, as opposed to contract violations.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}
