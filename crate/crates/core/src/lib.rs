//! Core of a desk-scale BoMAI agent: interaction histories, world-model and
//! policy interfaces, exact Bayesian posteriors, per-episode expectimax
//! planning and information-gain exploration.
//!
//! Probabilities are `f64`; rewards are exact rationals. Logarithms are
//! natural throughout.

pub mod bayes;
pub mod dist;
pub mod error;
pub mod explorer;
pub mod history;
pub mod model;
pub mod planner;
pub mod spaces;
pub mod tabular;

pub use bayes::{ExplorationTrace, ModelClass, PolicyClass, PosteriorState, Tracker};
pub use dist::Distribution;
pub use error::{CoreError, Result};
pub use explorer::{ExplorationConfig, IGReport};
pub use history::History;
pub use model::{Context, PolicyModel, SpaceParams, WorldModel};
pub use planner::{DeterministicEpisodePolicy, ReplanningPolicy};
pub use spaces::{Action, Observation, Percept, Reward, Spaces, Step, Timestep};
pub use tabular::{TabularPolicy, TabularWorldModel};
