use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoreError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("range error: {0}")]
    Range(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("impossible evidence: {0}")]
    ImpossibleEvidence(String),
    #[error("enumeration of {size} outcomes exceeds the cap of {cap}")]
    Infeasible { size: f64, cap: f64 },
    #[error("invalid distribution: {0}")]
    Distribution(String),
    #[error("session error: {0}")]
    Session(String),
}

pub type Result<T, E = CoreError> = std::result::Result<T, E>;

/// Errors with an `Infeasible` variant if `base^exp` exceeds `cap`.
pub fn check_cap(base: usize, exp: usize, cap: f64) -> Result<()> {
    let size = (base as f64).powi(exp as i32);
    if size > cap {
        Err(CoreError::Infeasible { size, cap })
    } else {
        Ok(())
    }
}
