#![allow(dead_code)]

use std::sync::Arc;

use bomai_core::dist::Distribution;
use bomai_core::spaces::{Action, Observation, Percept, Reward, Spaces, Step};
use bomai_core::tabular::{TabularPolicy, TabularWorldModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn spaces(m: usize) -> Arc<Spaces> {
    let d = Spaces::default_acceptance();
    Arc::new(
        Spaces::new(
            vec!["a0".into(), "a1".into()],
            vec!["o0".into(), "o1".into()],
            d.rewards().to_vec(),
            m,
        )
        .unwrap(),
    )
}

pub fn half() -> Reward {
    Reward::new(1, 2).unwrap()
}

pub fn percept(o: u8, r: Reward) -> Percept {
    Percept::new(Observation(o), r)
}

/// Single-state model with a fixed emission row per action.
pub fn stateless(name: &str, sp: &Arc<Spaces>, rows: Vec<Vec<(Percept, f64)>>) -> TabularWorldModel {
    let mut b = TabularWorldModel::builder(name, sp.clone(), vec!["s".into()]);
    for (a, row) in rows.into_iter().enumerate() {
        b.row(0, Action(a as u8), row.into_iter().map(|(p, q)| (p, q, 0)).collect()).unwrap();
    }
    b.build().unwrap()
}

/// Same emission for every action.
pub fn constant(name: &str, sp: &Arc<Spaces>, row: Vec<(Percept, f64)>) -> TabularWorldModel {
    stateless(name, sp, vec![row; sp.n_actions()])
}

fn random_row(sp: &Spaces, rng: &mut ChaCha8Rng, sparse: bool) -> Vec<(Percept, f64)> {
    let percepts = sp.percepts();
    let k = rng.random_range(1..=3.min(percepts.len()));
    let mut chosen: Vec<Percept> = Vec::new();
    while chosen.len() < k {
        let p = percepts[rng.random_range(0..percepts.len())];
        if !chosen.contains(&p) {
            chosen.push(p);
        }
    }
    if !sparse {
        chosen = percepts;
    }
    let raw: Vec<f64> = chosen.iter().map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let mut row: Vec<(Percept, f64)> = chosen.into_iter().zip(raw.iter().map(|x| x / total)).collect();
    let s: f64 = row[1..].iter().map(|(_, q)| q).sum();
    row[0].1 = 1.0 - s;
    row
}

/// A random finite-state model whose state follows the last observation.
pub fn random_model(name: &str, sp: &Arc<Spaces>, n_states: u32, seed: u64) -> TabularWorldModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let names = (0..n_states).map(|s| format!("s{s}")).collect();
    let mut b = TabularWorldModel::builder(name, sp.clone(), names);
    for s in 0..n_states {
        for a in sp.actions() {
            let row = random_row(sp, &mut rng, true);
            let outcomes = row.into_iter().map(|(p, q)| (p, q, u32::from(p.obs.0) % n_states)).collect();
            b.row(s, a, outcomes).unwrap();
        }
    }
    b.build().unwrap()
}

/// A random policy whose decision state tracks `tracker`.
pub fn random_policy(name: &str, tracker: Arc<TabularWorldModel>, seed: u64, deterministic: bool) -> TabularPolicy {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sp = tracker.spaces().clone();
    let per_state = (0..tracker.n_states())
        .map(|_| {
            if deterministic {
                Distribution::point(Action(rng.random_range(0..sp.n_actions()) as u8))
            } else {
                let p: f64 = rng.random_range(0.1..0.9);
                Distribution::new(vec![(Action(0), p), (Action(1), 1.0 - p)]).unwrap()
            }
        })
        .collect();
    TabularPolicy::new(name, tracker, per_state).unwrap()
}

/// Every sequence of `len` steps over the spaces.
pub fn all_blocks(sp: &Spaces, len: usize) -> Vec<Vec<Step>> {
    let mut out = vec![Vec::new()];
    for _ in 0..len {
        let mut next = Vec::new();
        for b in &out {
            for a in sp.actions() {
                for p in sp.percepts() {
                    let mut c = b.clone();
                    c.push(Step { action: a, percept: p });
                    next.push(c);
                }
            }
        }
        out = next;
    }
    out
}
