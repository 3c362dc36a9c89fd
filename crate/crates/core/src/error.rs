use thiserror::Error;

/// Errors raised by the barrier, filter and simulation layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("derivative order {requested} exceeds the nesting depth {max}")]
    NestingDepth { requested: usize, max: usize },
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("infeasible filter problem: {0}")]
    Infeasible(String),
    #[error("singular matrix: {0}")]
    Singular(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("unsupported configuration: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension { what, expected, got })
    }
}
