//! Space-bounded machines with an episode phase and an inter-episode phase,
//! the world-models they simulate, the space prior, and `K_β^Space`.

pub mod error;
pub mod exec;
pub mod kspace;
pub mod machine;
pub mod model;
pub mod prior;

pub use error::{Result, StmError};
pub use exec::{run_machine_episode, Config, Effect, Phase, PhaseAudit, RawRun, DEFAULT_BUDGET, DEFAULT_NOISE_DEPTH};
pub use kspace::{bits_from_hex, bits_from_str, k_space_estimate, k_space_estimates, KSpaceEstimate};
pub use machine::{enumerate_machines, measured_c, Head, Machine, Op, Signature, StateRule, Transition};
pub use model::{Decoder, StmWorldModel};
pub use prior::{space_of, zeta, EntropyEstimate, NormalizedPrior, SpacePrior};
