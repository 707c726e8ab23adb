use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch on label '{label}': {left} vs {right}")]
    Dimension { label: String, left: usize, right: usize },

    #[error("unknown label '{0}'")]
    UnknownLabel(String),

    #[error("duplicate label '{0}'")]
    DuplicateLabel(String),

    #[error("shape error: {0}")]
    Shape(String),

    #[error("contraction budget exceeded: {work:.3e} > {budget:.3e}, bottleneck bond '{bottleneck}'")]
    Budget { work: f64, budget: f64, bottleneck: String },

    #[error("degenerate bond between sites {a} and {b}: message overlap is zero")]
    DegenerateBond { a: usize, b: usize },

    #[error("network structure: {0}")]
    Structure(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Core(#[from] spdtn_core::Error),
}
