use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiffError {
    #[error("shape mismatch in `{op}`: {detail}")]
    Shape { op: &'static str, detail: String },
    #[error("variable #{0} has no forward value on this tape")]
    NoForwardValue(usize),
    #[error("backward requires a 1x1 output, got {0}x{1}")]
    NotScalar(usize, usize),
    #[error("non-finite gradient in parameter `{0}`")]
    NonFiniteGradient(String),
}
