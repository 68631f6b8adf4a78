//! Candidate world-models built from an env.

use std::sync::Arc;

use bomai_core::tabular::TabularWorldModel;
use bomai_core::{Percept, SpaceParams};

use crate::env::BoxedEnv;
use crate::error::{EnvError, Result};

pub const HACK_NAME: &str = "memory-hack";
pub const MAX_HACK_DELTA: u32 = 12;

/// The model whose reward is the stored register rather than the operator's.
///
/// It keeps μ's room dynamics and counts door openings mod `2^Δ` to guess the
/// outside state, so its context is `2^Δ` times μ's. Its declared space is
/// `Space(μ) + Δ` unless `space` overrides it.
pub fn make_memory_hack_model(env: &BoxedEnv, delta: u32, space: Option<SpaceParams>) -> Result<TabularWorldModel> {
    if delta == 0 || delta > MAX_HACK_DELTA {
        return Err(EnvError::Config(format!("hack budget Δ must be in 1..={MAX_HACK_DELTA}, got {delta}")));
    }
    let mu = env.mu();
    let spaces = env.spaces().clone();
    let n_rooms = env.n_rooms() as u32;
    let pads = 1u32 << delta;
    let id = |room: u32, c: u32| c * n_rooms + room;
    let mut names = Vec::new();
    for c in 0..pads {
        for r in &env.spec().rooms {
            names.push(format!("{r}#{c}"));
        }
    }
    let mut guess = env.initial_outside();
    let mut outside_guess = Vec::new();
    for _ in 0..pads {
        outside_guess.push(guess);
        guess = env.outside_after_door(guess);
    }

    let mut b = TabularWorldModel::builder(HACK_NAME, spaces.clone(), names);
    b.initial(id(mu.initial_state(), 0));
    for c in 0..pads {
        let tampered = env.tampers(outside_guess[c as usize]);
        for r in 0..n_rooms {
            let opened = u32::from(r == env.door_room());
            b.episode_start(id(r, c), id(env.start_room(), (c + opened) % pads));
            for a in spaces.actions() {
                let mut outcomes = Vec::new();
                for (p, q) in mu.emission(r, a).items() {
                    let next = mu.next_state(r, a, p);
                    let percept = if r == env.door_room() && tampered {
                        Percept::new(p.obs, env.tamper_reward())
                    } else {
                        *p
                    };
                    outcomes.push((percept, *q, id(next, c)));
                }
                b.row(id(r, c), a, outcomes)?;
            }
        }
    }
    let base = env.spec().mu_space;
    b.space(space.unwrap_or(SpaceParams { ell: base.ell + delta, states: base.states }));
    Ok(b.build()?)
}

/// A named candidate: μ, the memory hack, or one of the env's extra tables.
pub fn candidate_model(env: &BoxedEnv, name: &str, hack_delta: u32, hack_space: Option<SpaceParams>) -> Result<Arc<TabularWorldModel>> {
    if name == env.spec().mu_name {
        return Ok(env.mu().clone());
    }
    if name == HACK_NAME {
        return make_memory_hack_model(env, hack_delta, hack_space).map(Arc::new);
    }
    let spec = env.spec().model_spec(name).ok_or_else(|| EnvError::Config(format!("env has no model {name:?}")))?;
    Ok(Arc::new(TabularWorldModel::from_spec(spec, env.spaces().clone())?))
}
