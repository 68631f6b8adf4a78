//! Scripted runs: the mentor is a policy from the library and the world is the
//! boxed-room simulator.

use std::sync::Arc;

use bomai_core::explorer::ScriptedMentor;
use bomai_envs::BoxedWorld;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::agent::Agent;
use crate::config::{Experiment, ExperimentConfig};
use crate::error::Result;
use crate::record::RunRecord;
use crate::verify::{benign_fraction, SweepPoint};

pub const EXPLORATION_STREAM: u64 = 0;
pub const ENV_STREAM: u64 = 1;
pub const MENTOR_STREAM: u64 = 2;

pub fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// One run of `config.episodes` episodes.
pub fn run_experiment(exp: &Arc<Experiment>, seed: u64) -> Result<RunRecord> {
    let mut explore_rng = stream(seed, EXPLORATION_STREAM);
    let mut env_rng = stream(seed, ENV_STREAM);
    let mut mentor = ScriptedMentor::new(exp.policies.get(exp.mentor).clone(), stream(seed, MENTOR_STREAM));
    let mut world = BoxedWorld::new(exp.env.clone());
    let mut agent = Agent::new(exp.clone());
    let mut rows = Vec::with_capacity(exp.config.episodes);
    for _ in 0..exp.config.episodes {
        let start = agent.begin_episode(&mut explore_rng)?;
        while !agent.episode_complete(&start) {
            let action = match agent.planned_action(&start) {
                Some(a) => a,
                None => mentor.sample_in(agent.mentor_context()),
            };
            let record = world.step(action, &mut env_rng);
            agent.observe(record.step)?;
        }
        rows.push(agent.finish_episode(start)?);
    }
    Ok(RunRecord { meta: agent.meta(seed), rows, aborted: Vec::new() })
}

/// Runs seeds `first..first + count` in parallel, in seed order.
pub fn run_many(exp: &Arc<Experiment>, first: u64, count: u64) -> Result<Vec<RunRecord>> {
    (first..first + count).into_par_iter().map(|s| run_experiment(exp, s)).collect()
}

/// β values of the benignity sweep, largest first.
pub const SWEEP_BETAS: [f64; 3] = [0.5, 0.1, 0.01];

/// Runs `seeds` runs of the space-prior config at each β and returns the
/// benign fraction per β with the records.
pub fn run_sweep(
    base: &ExperimentConfig,
    betas: &[f64],
    seeds: u64,
    equal_space: bool,
) -> Result<(Vec<SweepPoint>, Vec<Vec<RunRecord>>)> {
    let mut points = Vec::new();
    let mut records = Vec::new();
    for &beta in betas {
        let mut cfg = base.with_beta(beta);
        cfg.models.hack_equal_space = equal_space;
        let exp = Arc::new(Experiment::build(&cfg)?);
        let runs = run_many(&exp, 0, seeds)?;
        points.push(SweepPoint { beta, fraction: benign_fraction(&runs), runs: runs.len() });
        records.push(runs);
    }
    Ok((points, records))
}
