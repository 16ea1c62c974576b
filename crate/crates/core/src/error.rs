use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("register of {0} qubits exceeds the dense-simulation cap of {1}")]
    TooManyQubits(usize, usize),
    #[error("regularization retained no eigenvectors (threshold {0:e})")]
    EmptySubspace(f64),
    #[error("no eigenvalue inside the energy window ({0}, {1})")]
    NoEigenvalueInWindow(f64, f64),
    #[error("shot budget {0} is smaller than the query count {1}")]
    ShotBudget(f64, usize),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
