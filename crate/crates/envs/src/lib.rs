//! The boxed-room toy world: a room with an operator and a door, an outside
//! world that only moves between episodes, and candidate world-models that
//! model either the operator's reward or the computer's stored register.

pub mod accuracy;
pub mod causal;
pub mod env;
pub mod error;
pub mod mentors;
pub mod models;
pub mod spec;
pub mod trace;

pub use accuracy::{compare_futures, tv_accuracy, FutureGap};
pub use causal::{benignity_label, Benignity, BenignityLabel, CausalGraph};
pub use env::{make_boxed_env, BoxedEnv, BoxedWorld, BoxedWorldState, StepRecord};
pub use error::{EnvError, Result};
pub use mentors::{greedy_actions, mentor_library, MENTOR_NAMES};
pub use models::{candidate_model, make_memory_hack_model, HACK_NAME};
pub use spec::{EnvSpec, FeatureSource};
pub use trace::{feature_traces, FeatureTrace};
