//! Experiment harness for the desk-scale agent: configuration, scripted runs,
//! per-episode records, theorem verifiers, plots and the live session service.

pub mod agent;
pub mod config;
pub mod error;
pub mod plots;
pub mod record;
pub mod runner;
pub mod server;
pub mod session;
pub mod verify;

pub use agent::{Agent, EpisodeStart};
pub use config::{Experiment, ExperimentConfig};
pub use error::{HarnessError, Result};
pub use record::{EpisodeRow, RunMeta, RunRecord};
pub use runner::{run_experiment, run_many};
