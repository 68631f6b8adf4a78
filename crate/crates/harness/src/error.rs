use bomai_core::CoreError;
use bomai_envs::EnvError;
use bomai_stm::StmError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("episode {episode}: {source}")]
    Episode {
        episode: usize,
        #[source]
        source: Box<HarnessError>,
    },
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("record error: {0}")]
    Record(String),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Stm(#[from] StmError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl HarnessError {
    pub fn at_episode(self, episode: usize) -> HarnessError {
        match self {
            e @ HarnessError::Episode { .. } => e,
            e => HarnessError::Episode { episode, source: Box::new(e) },
        }
    }
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;
