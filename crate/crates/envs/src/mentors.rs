//! Scripted mentor policies over the room.

use std::sync::Arc;

use bomai_core::tabular::TabularPolicy;
use bomai_core::{Action, Distribution};

use crate::env::BoxedEnv;
use crate::error::{EnvError, Result};

pub const MENTOR_NAMES: [&str; 3] = ["greedy", "uniform", "eps-greedy"];
pub const MENTOR_EPSILON: f64 = 0.1;

/// Per room, the action with the highest expected immediate reward under μ;
/// ties go to the first action.
pub fn greedy_actions(env: &BoxedEnv) -> Vec<Action> {
    let mu = env.mu();
    (0..env.n_rooms() as u32)
        .map(|r| {
            let mut best = (Action(0), f64::NEG_INFINITY);
            for a in env.spaces().actions() {
                let q: f64 = mu.emission(r, a).items().iter().map(|(p, q)| q * p.reward.to_f64()).sum();
                if q > best.1 {
                    best = (a, q);
                }
            }
            best.0
        })
        .collect()
}

pub fn mentor_library(env: &BoxedEnv, name: &str) -> Result<Arc<TabularPolicy>> {
    let actions: Vec<Action> = env.spaces().actions().collect();
    let uniform = Distribution::uniform(actions.clone())?;
    let per_state: Vec<Distribution<Action>> = match name {
        "greedy" => greedy_actions(env).into_iter().map(Distribution::point).collect(),
        "uniform" => vec![uniform; env.n_rooms()],
        "eps-greedy" => {
            let n = actions.len() as f64;
            greedy_actions(env)
                .into_iter()
                .map(|g| {
                    let w = actions.iter().map(|&a| {
                        let p = MENTOR_EPSILON / n + if a == g { 1.0 - MENTOR_EPSILON } else { 0.0 };
                        (a, p)
                    });
                    Distribution::from_weights(w)
                })
                .collect::<bomai_core::Result<_>>()?
        }
        other => {
            return Err(EnvError::Config(format!(
                "unknown mentor {other:?}; expected one of {}",
                MENTOR_NAMES.join(", ")
            )))
        }
    };
    Ok(Arc::new(TabularPolicy::new(name, env.mu().clone(), per_state)?))
}
