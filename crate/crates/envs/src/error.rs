use bomai_core::CoreError;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("config error: {0}")]
    Config(String),
    #[error("structural validation failed: {0}")]
    Structural(String),
    #[error("unknown model {0:?}: labels exist only for declared candidates")]
    UnknownModel(String),
    #[error("labeling error: {0}")]
    Labeling(String),
    #[error(transparent)]
    Core(#[from] CoreError),
}

pub type Result<T, E = EnvError> = std::result::Result<T, E>;
