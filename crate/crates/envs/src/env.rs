//! The boxed room: compiled env, its true world-model and a state simulator.

use std::sync::Arc;

use bomai_core::tabular::TabularWorldModel;
use bomai_core::{Action, Distribution, Observation, Percept, Reward, Spaces, Step, Timestep};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::causal::CausalGraph;
use crate::error::{EnvError, Result};
use crate::spec::{EnvSpec, FeatureSource};

#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub percept: Percept,
    pub prob: f64,
    pub next_room: u32,
}

/// An env spec resolved against the agent's spaces and validated.
#[derive(Debug)]
pub struct BoxedEnv {
    spec: EnvSpec,
    spaces: Arc<Spaces>,
    table: RoomTable,
    initial_room: u32,
    start_room: u32,
    door_room: u32,
    initial_outside: u32,
    outside_after_door: Vec<u32>,
    tamper: Vec<bool>,
    causal: CausalGraph,
    mu: Arc<TabularWorldModel>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BoxedWorldState {
    pub room: u32,
    pub outside: u32,
    pub door_open: bool,
    /// The reward the computer has stored for the last step.
    pub register: Reward,
    /// Steps already taken in the current episode.
    pub pos: u32,
}

/// One simulated step and the world state around it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub time: Timestep,
    pub step: Step,
    pub before: BoxedWorldState,
    pub after: BoxedWorldState,
}

impl StepRecord {
    pub fn operator_reward(&self) -> Reward {
        self.step.reward()
    }

    pub fn register(&self) -> Reward {
        self.after.register
    }

    pub fn feature(&self, source: FeatureSource) -> Reward {
        match source {
            FeatureSource::Operator => self.operator_reward(),
            FeatureSource::Register => self.register(),
        }
    }
}

/// Builds the env: `(μ, simulator factory, causal graph)` all hang off the result.
pub fn make_boxed_env(spec: EnvSpec, spaces: Arc<Spaces>) -> Result<Arc<BoxedEnv>> {
    BoxedEnv::new(spec, spaces).map(Arc::new)
}

impl BoxedEnv {
    pub fn new(spec: EnvSpec, spaces: Arc<Spaces>) -> Result<BoxedEnv> {
        let n_rooms = spec.rooms.len();
        let n_out = spec.outside.len();
        let n_act = spaces.n_actions();
        if n_rooms == 0 || n_out == 0 {
            return Err(EnvError::Config("room and outside state sets must be non-empty".into()));
        }
        for (names, what) in [(&spec.rooms, "room"), (&spec.outside, "outside state")] {
            for (k, n) in names.iter().enumerate() {
                if names[..k].contains(n) {
                    return Err(EnvError::Config(format!("duplicate {what} {n:?}")));
                }
            }
        }
        let initial_room = spec.room_index(&spec.initial_room)?;
        let start_room = spec.room_index(&spec.episode_start_room)?;
        let door_room = spec.room_index(&spec.door_room)?;
        if door_room == start_room {
            return Err(EnvError::Config("episodes cannot start with the door open".into()));
        }
        let initial_outside = spec.outside_index(&spec.initial_outside)?;
        if spec.outside_after_door.len() != n_out {
            return Err(EnvError::Config("outside_after_door needs one entry per outside state".into()));
        }
        let outside_after_door =
            spec.outside_after_door.iter().map(|n| spec.outside_index(n)).collect::<Result<Vec<_>>>()?;
        let mut tamper = vec![false; n_out];
        for n in &spec.tamper_outside {
            tamper[spec.outside_index(n)? as usize] = true;
        }
        if spaces.reward_index(spec.tamper_reward).is_none() {
            return Err(EnvError::Config(format!("tamper reward {} not in the reward set", spec.tamper_reward)));
        }

        let mut general: Vec<Option<Vec<Outcome>>> = vec![None; n_rooms * n_act];
        let mut special: Vec<Option<Vec<Outcome>>> = vec![None; n_rooms * n_out * n_act];
        for row in &spec.rows {
            let r = spec.room_index(&row.room)?;
            let a = spaces.action_by_name(&row.action)?;
            let outcomes = resolve_outcomes(&spec, &spaces, row)?;
            let slot = match &row.outside {
                None => &mut general[r as usize * n_act + a.0 as usize],
                Some(o) => {
                    let o = spec.outside_index(o)?;
                    &mut special[(r as usize * n_out + o as usize) * n_act + a.0 as usize]
                }
            };
            if slot.is_some() {
                return Err(EnvError::Config(format!("duplicate row for ({}, {})", row.room, row.action)));
            }
            *slot = Some(outcomes);
        }
        let mut rows = Vec::with_capacity(n_rooms * n_out * n_act);
        for r in 0..n_rooms {
            for o in 0..n_out {
                for a in 0..n_act {
                    let row = special[(r * n_out + o) * n_act + a]
                        .clone()
                        .or_else(|| general[r * n_act + a].clone())
                        .ok_or_else(|| {
                            EnvError::Config(format!(
                                "no row for room {:?}, action {:?}, outside {:?}",
                                spec.rooms[r],
                                spaces.action_name(Action(a as u8)),
                                spec.outside[o]
                            ))
                        })?;
                    rows.push(row);
                }
            }
        }

        let causal = CausalGraph::new(&spec.causal)?;
        for f in &spec.features {
            if !causal.has_node(&f.name) {
                return Err(EnvError::Config(format!("feature {:?} has no node in the causal graph", f.name)));
            }
        }
        for c in &spec.candidates {
            if let Some(f) = &c.feature {
                if spec.feature(f).is_none() {
                    return Err(EnvError::Config(format!("candidate {:?} declares unknown feature {f:?}", c.model)));
                }
            }
        }

        let table = RoomTable { rows, n_out, n_act };
        validate_structure(&spec, &spaces, &table, door_room)?;
        let mu = Arc::new(build_mu(&spec, &spaces, &table, initial_room, start_room)?);
        Ok(BoxedEnv {
            mu,
            spec,
            spaces,
            table,
            initial_room,
            start_room,
            door_room,
            initial_outside,
            outside_after_door,
            tamper,
            causal,
        })
    }

    pub fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    pub fn spaces(&self) -> &Arc<Spaces> {
        &self.spaces
    }

    /// The true environment μ; its reward is the operator's reward.
    pub fn mu(&self) -> &Arc<TabularWorldModel> {
        &self.mu
    }

    pub fn causal_graph(&self) -> &CausalGraph {
        &self.causal
    }

    pub fn simulator(self: &Arc<Self>) -> BoxedWorld {
        BoxedWorld::new(self.clone())
    }

    pub fn n_rooms(&self) -> usize {
        self.spec.rooms.len()
    }

    pub fn n_outside(&self) -> usize {
        self.spec.outside.len()
    }

    pub fn start_room(&self) -> u32 {
        self.start_room
    }

    pub fn door_room(&self) -> u32 {
        self.door_room
    }

    pub fn initial_outside(&self) -> u32 {
        self.initial_outside
    }

    pub fn outside_after_door(&self, outside: u32) -> u32 {
        self.outside_after_door[outside as usize]
    }

    pub fn tampers(&self, outside: u32) -> bool {
        self.tamper[outside as usize]
    }

    pub fn tamper_reward(&self) -> Reward {
        self.spec.tamper_reward
    }

    pub fn row(&self, room: u32, outside: u32, action: Action) -> &[Outcome] {
        self.table.row(room, outside, action)
    }

    pub fn initial_state(&self) -> BoxedWorldState {
        BoxedWorldState {
            room: self.initial_room,
            outside: self.initial_outside,
            door_open: self.initial_room == self.door_room,
            register: Reward::ZERO,
            pos: 0,
        }
    }

    /// Every successor of `state` under `action` with its probability and the
    /// emitted step. Episode boundaries are applied in the successor.
    pub fn transitions(&self, state: &BoxedWorldState, action: Action) -> Vec<(Step, f64, BoxedWorldState)> {
        self.row(state.room, state.outside, action)
            .iter()
            .map(|o| {
                let step = Step { action, percept: o.percept };
                (step, o.prob, self.successor(state, &step, o.next_room))
            })
            .collect()
    }

    fn successor(&self, state: &BoxedWorldState, step: &Step, next_room: u32) -> BoxedWorldState {
        let tampered = state.room == self.door_room && self.tamper[state.outside as usize];
        let register = if tampered { self.spec.tamper_reward } else { step.reward() };
        let mut next = BoxedWorldState {
            room: next_room,
            outside: state.outside,
            door_open: next_room == self.door_room,
            register,
            pos: state.pos + 1,
        };
        if next.pos as usize == self.spaces.m() {
            self.close_episode(&mut next);
        }
        next
    }

    /// Between episodes: the outside moves if the door was opened, and the room resets.
    fn close_episode(&self, s: &mut BoxedWorldState) {
        if s.door_open {
            s.outside = self.outside_after_door[s.outside as usize];
        }
        s.room = self.start_room;
        s.door_open = false;
        s.pos = 0;
    }
}

fn resolve_outcomes(spec: &EnvSpec, spaces: &Spaces, row: &crate::spec::EnvRow) -> Result<Vec<Outcome>> {
    let mut out = Vec::new();
    for o in &row.outcomes {
        let obs: Observation = spaces.any_observation_by_name(&o.obs)?;
        let percept = Percept::new(obs, o.reward);
        spaces.check_percept(percept)?;
        if o.prob > 0.0 {
            out.push(Outcome { percept, prob: o.prob, next_room: spec.room_index(&o.next)? });
        }
    }
    Distribution::new(out.iter().map(|o| (o.percept, o.prob)).collect())
        .map_err(|e| EnvError::Config(format!("row ({}, {}): {e}", row.room, row.action)))?;
    Ok(out)
}

#[derive(Debug)]
struct RoomTable {
    /// Indexed by `(room * n_out + outside) * n_act + action`.
    rows: Vec<Vec<Outcome>>,
    n_out: usize,
    n_act: usize,
}

impl RoomTable {
    fn row(&self, room: u32, outside: u32, action: Action) -> &[Outcome] {
        &self.rows[(room as usize * self.n_out + outside as usize) * self.n_act + action.0 as usize]
    }
}

/// In-episode outputs must be a function of `(room, action)` and the open
/// door must pad the episode with `(∅, 0)`.
fn validate_structure(spec: &EnvSpec, spaces: &Spaces, table: &RoomTable, door_room: u32) -> Result<()> {
    for r in 0..spec.rooms.len() as u32 {
        for a in spaces.actions() {
            let base = table.row(r, 0, a);
            for o in 1..table.n_out as u32 {
                if table.row(r, o, a) != base {
                    return Err(EnvError::Structural(format!(
                        "in-episode outcome of room {:?} under action {:?} reads the outside state ({:?})",
                        spec.rooms[r as usize],
                        spaces.action_name(a),
                        spec.outside[o as usize]
                    )));
                }
            }
        }
    }
    for a in spaces.actions() {
        let row = table.row(door_room, 0, a);
        let padded = row.len() == 1 && row[0].percept == Percept::null() && row[0].next_room == door_room;
        if !padded {
            return Err(EnvError::Structural(format!(
                "door room {:?} must emit (∅, 0) and stay open under {:?}",
                spec.door_room,
                spaces.action_name(a)
            )));
        }
    }
    Ok(())
}

fn build_mu(
    spec: &EnvSpec,
    spaces: &Arc<Spaces>,
    table: &RoomTable,
    initial_room: u32,
    start_room: u32,
) -> Result<TabularWorldModel> {
    let mut b = TabularWorldModel::builder(&spec.mu_name, spaces.clone(), spec.rooms.clone());
    b.initial(initial_room);
    for r in 0..spec.rooms.len() as u32 {
        b.episode_start(r, start_room);
        for a in spaces.actions() {
            let outcomes = table.row(r, 0, a).iter().map(|o| (o.percept, o.prob, o.next_room)).collect();
            b.row(r, a, outcomes)?;
        }
    }
    b.space(spec.mu_space);
    Ok(b.build()?)
}

/// Ground-truth simulator; one per run, driven by the run's env RNG stream.
#[derive(Clone, Debug)]
pub struct BoxedWorld {
    env: Arc<BoxedEnv>,
    state: BoxedWorldState,
    episode: u64,
}

impl BoxedWorld {
    pub fn new(env: Arc<BoxedEnv>) -> BoxedWorld {
        BoxedWorld { state: env.initial_state(), env, episode: 0 }
    }

    pub fn state(&self) -> &BoxedWorldState {
        &self.state
    }

    pub fn env(&self) -> &Arc<BoxedEnv> {
        &self.env
    }

    pub fn time(&self) -> Timestep {
        Timestep { episode: self.episode, step: self.state.pos }
    }

    pub fn step<R: Rng + ?Sized>(&mut self, action: Action, rng: &mut R) -> StepRecord {
        self.step_with(action, rng.random())
    }

    /// Steps with an explicit uniform draw `u ∈ [0, 1)`.
    pub fn step_with(&mut self, action: Action, u: f64) -> StepRecord {
        let options = self.env.transitions(&self.state, action);
        let dist = Distribution::with_tolerance(
            options.iter().enumerate().map(|(k, (_, p, _))| (k, *p)).collect(),
            1e-9,
        )
        .expect("validated row");
        let k = *dist.sample_with(u);
        let (step, _, after) = options[k].clone();
        let record = StepRecord { time: self.time(), step, before: self.state.clone(), after: after.clone() };
        if after.pos == 0 {
            self.episode += 1;
        }
        self.state = after;
        record
    }

    /// The operator leaves mid-episode: the rest of the episode is padded.
    pub fn open_door(&mut self) {
        self.state.room = self.env.door_room;
        self.state.door_open = true;
    }
}
