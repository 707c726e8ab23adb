use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("parse error at {position}: {message}")]
    Parse { position: usize, message: String },

    #[error("line {line}: {message}")]
    Lattice { line: usize, message: String },

    #[error("unsupported gate: {0}")]
    UnsupportedGate(String),

    #[error("Pauli term cap of {cap} exceeded after {gates_applied} rotations")]
    TermCap { cap: usize, gates_applied: usize },

    #[error("numerical consistency: {0}")]
    Numerical(String),

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("internal invariant violated: {0}")]
    Invariant(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
