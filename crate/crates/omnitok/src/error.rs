//! Error type shared by all planning, pruning, and packing operations.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The patch budget admits no even×even grid. The smallest legal grid is
    /// 2×2 = 4 patches, so any `max_patches < 4` is unsatisfiable, as are
    /// degenerate bands too narrow for the deterministic grid walk.
    #[error("patch budget [{min_patches}, {max_patches}] cannot be met by an even patch grid")]
    BudgetInfeasible { min_patches: u64, max_patches: u64 },

    #[error("sequence {index} has length {length}, above bin capacity {capacity}")]
    OversizedSequence {
        index: usize,
        length: u64,
        capacity: u64,
    },

    #[error("malformed stream at event {event_index}: {detail}")]
    MalformedStream { event_index: usize, detail: String },

    #[error("invalid state: {0}")]
    InvalidState(&'static str),

    #[error("unknown stage {0:?} (expected one of \"16k\", \"48k\", \"256k\")")]
    UnknownStage(String),

    /// Binary decode failure for `.evst` / `.evsm` payloads or a trace file.
    #[error("format error: {0}")]
    BadFormat(String),

    #[error("manifest error: {0}")]
    Manifest(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    /// A report failed its own self-consistency recomputation. Reaching this
    /// is a bug in this crate, never a caller mistake; the CLI maps it to a
    /// distinct exit code.
    #[error("internal invariant violation: {0}")]
    Internal(String),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
