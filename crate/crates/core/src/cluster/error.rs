use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ClusterError {
    #[error("label arrays differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("requested {k} clusters/neighbors from {n} points")]
    TooMany { k: usize, n: usize },
    #[error("empty input")]
    Empty,
}
