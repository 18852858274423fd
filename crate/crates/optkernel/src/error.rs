use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("malformed model: {0}")]
    Malformed(String),
    #[error("simplex iteration limit of {0} exceeded")]
    IterationLimit(usize),
    #[error("basis became numerically singular")]
    SingularBasis,
    #[error("model too large for the dense kernel: {rows} rows x {cols} columns")]
    TooLarge { rows: usize, cols: usize },
    #[error("invalid flow network: {0}")]
    InvalidNetwork(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}
