//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degree mismatch: {0}")]
    DegreeMismatch(String),
    #[error("group order cap exceeded (cap {cap})")]
    OrderCapExceeded { cap: usize },
    #[error("not a subgroup: {0}")]
    NotASubgroup(String),
    #[error("field mismatch: {0}")]
    FieldMismatch(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("cap exceeded: {0}")]
    CapExceeded(String),
    #[error("construction audit failed: {0}")]
    AuditFailed(String),
    #[error("hypothesis not satisfied: {0}")]
    HypothesisViolated(String),
    #[error("{0}")]
    Unsupported(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
