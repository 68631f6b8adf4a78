use bomai_core::CoreError;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StmError {
    #[error("{what} of size {size} exceeds the cap of {cap}")]
    Infeasible { what: &'static str, size: f64, cap: f64 },
    #[error("machine text, line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] CoreError),
}

pub type Result<T, E = StmError> = std::result::Result<T, E>;
